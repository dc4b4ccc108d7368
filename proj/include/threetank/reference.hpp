#pragma once

#include <array>
#include <vector>

namespace threetank::harness {

struct Segment {
  double t_start = 0.0;  // [s]
  double level = 0.0;    // [m]
};

// Piecewise-constant step program, one segment list per tracked output.
struct ReferenceProgram {
  std::array<std::vector<Segment>, 2> channels;

  // Throws ConfigError unless each channel is non-empty, has strictly
  // increasing start times and levels in [0, h_max].
  void validate(double h_max) const;
};

// Right-continuous lookup. Before the first segment the first level holds.
double generate_reference(const std::vector<Segment>& channel, double t);
double generate_reference(const ReferenceProgram& prog, int channel, double t);

}  // namespace threetank::harness
