#include "threetank/reference.hpp"

#include "threetank/types.hpp"

#include <cmath>
#include <string>

namespace threetank::harness {

void ReferenceProgram::validate(double h_max) const {
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto& segments = channels[c];
    const std::string name = "reference channel y" + std::to_string(c + 1);
    if (segments.empty()) throw ConfigError(name + " has no segments");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      if (!std::isfinite(s.t_start) || !std::isfinite(s.level)) {
        throw ConfigError(name + " contains a non-finite value");
      }
      if (s.level < 0.0 || s.level > h_max) {
        throw ConfigError(name + " level " + std::to_string(s.level) + " outside [0, h_max]");
      }
      if (i > 0 && !(s.t_start > segments[i - 1].t_start)) {
        throw ConfigError(name + " start times must be strictly increasing");
      }
    }
  }
}

double generate_reference(const std::vector<Segment>& channel, double t) {
  if (channel.empty()) throw ConfigError("reference channel has no segments");
  double level = channel.front().level;
  for (const auto& s : channel) {
    if (t >= s.t_start) level = s.level;
    else break;
  }
  return level;
}

double generate_reference(const ReferenceProgram& prog, int channel, double t) {
  if (channel < 0 || channel > 1) throw ConfigError("reference channel must be 0 or 1");
  return generate_reference(prog.channels[static_cast<std::size_t>(channel)], t);
}

}  // namespace threetank::harness
