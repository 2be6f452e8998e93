#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pacer/io.hpp"
#include "pacer/model.hpp"

namespace pacer {

struct Scenario {
  std::string name;
  std::string description;
  ModelConfig config;
};

// Bundled reference configurations: the flat 1500 m calibration, its
// four-piece aerobic variant, and the slope scenarios.
inline std::vector<Scenario> fixtures() {
  std::vector<Scenario> out;

  RunnerParams flat{0.932, 8.0, 0.0025, 4651.0, 3.0, 1e-5, 1500.0};
  SigmaProfile three{SigmaVariant::ThreePiece, 22.0, 20.0, 6.0, 0.15, 566.0};
  out.push_back({"flat1500", "1500 m on a flat track, three-piece aerobic curve",
                 ModelConfig{flat, three, SlopeProfile{}}});

  RunnerParams four_p{1.032, 8.0, 0.0025, 4651.0, 1.0, 1e-5, 1500.0};
  SigmaProfile four{SigmaVariant::FourPiece, 22.0, 20.0, 6.0, 0.15, 2000.0,
                    1.0 - 2000.0 / 4651.0 - 400.0 / 4651.0, 0.8};
  out.push_back({"fourpiece1500", "1500 m with a four-piece aerobic curve (early local maximum)",
                 ModelConfig{four_p, four, SlopeProfile{}}});

  SlopeProfile uphill;
  uphill.segments = {{700.0, 1000.0, 0.03}};
  out.push_back({"slope3", "flat1500 with a 3% uphill slope between 700 m and 1000 m",
                 ModelConfig{flat, three, uphill}});

  SlopeProfile downhill;
  downhill.segments = {{700.0, 1000.0, -0.03}};
  out.push_back({"ramp3", "flat1500 with a 3% downhill ramp between 700 m and 1000 m",
                 ModelConfig{flat, three, downhill}});

  SlopeProfile periodic;
  periodic.segments = {{400.0, 600.0, 0.02},
                       {600.0, 800.0, -0.02},
                       {800.0, 1000.0, 0.02},
                       {1000.0, 1200.0, -0.02}};
  out.push_back({"periodic2", "flat1500 with alternating 2% slopes and ramps between 400 m and 1200 m",
                 ModelConfig{flat, three, periodic}});

  return out;
}

inline Scenario find_fixture(const std::string& name) {
  for (const auto& s : fixtures())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown fixture '" + name + "'");
}

}  // namespace pacer
