#pragma once

#include "pkmdp/episode.hpp"
#include "pkmdp/model.hpp"
#include "pkmdp/policy.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace pkmdp {

/**
 * Plain-text model format.
 *
 *   pkmdp-model 1
 *   space <role> <name> <size> [<label> ...]
 *   table <p_x0|p_x|p_o|p_z|p_s|p_y> <rows> <cols>
 *   <cols values>                      (one line per parent tuple)
 *   vector <r_x|r_s|p_s0> <n>
 *   <n values>
 *   end
 *
 * Roles are x, y, z, o, a and (full models only) s. Table parents follow the
 * fixed signatures of KnownModel/FullModel, so only shapes are written. Lines
 * starting with '#' are comments. Numbers are written in shortest
 * round-trip form, so reading back reproduces every table bit for bit.
 * Labels may not contain whitespace.
 */
class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_known_model(std::ostream& out, const KnownModel& model);
void write_full_model(std::ostream& out, const FullModel& model);
KnownModel read_known_model(std::istream& in);
FullModel read_full_model(std::istream& in);

/// Episodes with their sampling policies, for checkpointing a buffer's data.
///
///   pkmdp-episodes 1
///   episode <H> <unknown_return> <policy_index>
///   y <H ids>
///   z <H ids>
///   policy <rows> <cols>
///   <cols logits>                      (one line per observation)
///   end
void write_episodes(std::ostream& out, const std::vector<Episode>& episodes, const std::vector<Policy>& policies);
void read_episodes(std::istream& in, std::vector<Episode>& episodes, std::vector<Policy>& policies);

std::string format_double(double value);

}  // namespace pkmdp
