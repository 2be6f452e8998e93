#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacer/fit.hpp"
#include "pacer/model.hpp"
#include "pacer/ocp.hpp"
#include "pacer/turnpike.hpp"

namespace pacer {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON schema for the model inputs. Field names spell out the glossary
// symbols ("tau", "sigma_bar", ...).
// ---------------------------------------------------------------------------

inline json to_json(const RunnerParams& p) {
  return json{{"tau", p.tau},       {"f_max", p.f_max},     {"gamma_motor", p.gamma_motor},
              {"e0", p.e0},         {"v0", p.v0},           {"alpha", p.alpha},
              {"distance", p.distance}};
}

inline RunnerParams runner_from_json(const json& j) {
  RunnerParams p{};
  p.tau = j.at("tau").get<double>();
  p.f_max = j.at("f_max").get<double>();
  p.gamma_motor = j.at("gamma_motor").get<double>();
  p.e0 = j.at("e0").get<double>();
  p.v0 = j.at("v0").get<double>();
  p.alpha = j.at("alpha").get<double>();
  p.distance = j.at("distance").get<double>();
  p.validate();
  return p;
}

inline json to_json(const SigmaProfile& s) {
  json j{{"variant", s.variant == SigmaVariant::ThreePiece ? "three_piece" : "four_piece"},
         {"sigma_bar", s.sigma_bar},
         {"sigma_f", s.sigma_f},
         {"sigma_r", s.sigma_r},
         {"gamma1", s.gamma1},
         {"gamma2", s.gamma2}};
  if (s.variant == SigmaVariant::FourPiece) {
    j["gamma_plus"] = s.gamma_plus;
    j["bump"] = s.bump;
  }
  return j;
}

inline SigmaProfile sigma_from_json(const json& j) {
  SigmaProfile s{};
  std::string variant = j.at("variant").get<std::string>();
  if (variant == "three_piece")
    s.variant = SigmaVariant::ThreePiece;
  else if (variant == "four_piece")
    s.variant = SigmaVariant::FourPiece;
  else
    throw std::invalid_argument("sigma_from_json: unknown variant '" + variant + "'");
  s.sigma_bar = j.at("sigma_bar").get<double>();
  s.sigma_f = j.at("sigma_f").get<double>();
  s.sigma_r = j.at("sigma_r").get<double>();
  s.gamma1 = j.at("gamma1").get<double>();
  s.gamma2 = j.at("gamma2").get<double>();
  if (s.variant == SigmaVariant::FourPiece) {
    s.gamma_plus = j.at("gamma_plus").get<double>();
    s.bump = j.value("bump", 0.8);
  }
  return s;
}

inline json to_json(const SlopeProfile& sp) {
  json segments = json::array();
  for (const auto& seg : sp.segments)
    segments.push_back({{"x_start", seg.x_start}, {"x_end", seg.x_end}, {"delta", seg.delta}});
  return json{{"g", sp.g}, {"segments", segments}};
}

inline SlopeProfile slope_from_json(const json& j) {
  SlopeProfile sp;
  sp.g = j.value("g", 9.81);
  if (j.contains("segments"))
    for (const auto& seg : j.at("segments"))
      sp.segments.push_back(SlopeSegment{seg.at("x_start").get<double>(),
                                         seg.at("x_end").get<double>(),
                                         seg.at("delta").get<double>()});
  sp.validate();
  return sp;
}

struct ModelConfig {
  RunnerParams runner;
  SigmaProfile sigma;
  SlopeProfile slope;
};

inline json to_json(const ModelConfig& c) {
  return json{{"runner", to_json(c.runner)}, {"sigma", to_json(c.sigma)},
              {"slope", to_json(c.slope)}};
}

inline ModelConfig config_from_json(const json& j) {
  ModelConfig c{runner_from_json(j.at("runner")), sigma_from_json(j.at("sigma")),
                j.contains("slope") ? slope_from_json(j.at("slope")) : SlopeProfile{}};
  c.sigma.validate(c.runner.e0);
  return c;
}

inline json to_json(const TurnpikeSolution& s) {
  return json{{"v_bar_simple", s.v_bar_simple},
              {"v_bar", s.v_bar},
              {"f_bar", s.f_bar},
              {"u_bar", s.u_bar},
              {"t1", s.t1},
              {"t2", s.t2},
              {"t_f", s.t_f},
              {"t_bar", s.t_bar},
              {"f0", s.f0},
              {"v_max", s.v_max},
              {"d1", s.d1},
              {"d_bar", s.d_bar},
              {"dt_end", s.dt_end},
              {"lambda", s.lambda},
              {"v_f", s.v_f}};
}

inline json to_json(const FittedParams& f) {
  return json{{"tau", f.tau},
              {"v_max", f.v_max},
              {"e0", f.e0},
              {"gamma1", f.gamma1},
              {"gamma2", f.gamma2},
              {"residual", f.residual},
              {"tau_identifiable", f.tau_identifiable},
              {"gammas_identifiable", f.gammas_identifiable}};
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string format_number(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
  out << "t,x,v,f,e,u\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const State& s = traj.states[k];
    out << format_number(traj.times[k]) << ',' << format_number(s.x) << ','
        << format_number(s.v) << ',' << format_number(s.f) << ',' << format_number(s.e) << ','
        << format_number(traj.controls[k]) << '\n';
  }
}

// Sampled closed-form profile as (t, v, phase).
inline void write_profile_csv(const TurnpikeProfile& profile, const std::string& path,
                              int samples = 1000) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_profile_csv: cannot open " + path);
  out << "t,v,phase\n";
  double t_f = profile.solution().t_f;
  for (int i = 0; i <= samples; ++i) {
    double t = t_f * i / samples;
    out << format_number(t) << ',' << format_number(profile.velocity(t)) << ','
        << profile.phase(t) << '\n';
  }
}

// Reads a velocity series from CSV. Accepts a (t, v) layout or a cumulative
// (distance, time) split layout, converted to midpoint velocities.
inline VelocitySeries read_velocity_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_velocity_csv: cannot open " + path);
  std::string header;
  std::getline(in, header);
  auto lower = header;
  for (char& c : lower) c = static_cast<char>(std::tolower(c));
  bool tv = lower.find("t,v") == 0 || lower.find("t, v") == 0;
  bool xt = lower.find("distance") == 0;
  if (!tv && !xt)
    throw std::runtime_error("read_velocity_csv: expected header 't,v' or 'distance,time'");
  std::vector<double> col0, col1;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b;
    std::getline(ls, a, ',');
    std::getline(ls, b, ',');
    col0.push_back(std::stod(a));
    col1.push_back(std::stod(b));
  }
  VelocitySeries series;
  if (tv) {
    series.t = std::move(col0);
    series.v = std::move(col1);
    double integral = 0.0;
    for (std::size_t i = 1; i < series.t.size(); ++i)
      integral += 0.5 * (series.v[i] + series.v[i - 1]) * (series.t[i] - series.t[i - 1]);
    series.distance = integral;
  } else {
    for (std::size_t i = 1; i < col0.size(); ++i) {
      double dx = col0[i] - col0[i - 1], dt = col1[i] - col1[i - 1];
      if (!(dt > 0.0)) throw std::runtime_error("read_velocity_csv: split times must increase");
      series.t.push_back(0.5 * (col1[i] + col1[i - 1]));
      series.v.push_back(dx / dt);
    }
    series.distance = col0.back() - col0.front();
  }
  if (tv) {
    series.validate();
  } else {
    // The split layout carries the exact total distance, while the midpoint
    // velocity samples omit half a split at either end, so the trapezoid
    // cross-check of validate() does not apply.
    for (std::size_t i = 1; i < series.t.size(); ++i)
      if (!(series.t[i] > series.t[i - 1]))
        throw std::runtime_error("read_velocity_csv: split times must increase");
    for (double v : series.v)
      if (!(v > 0.0)) throw std::runtime_error("read_velocity_csv: nonpositive split velocity");
  }
  return series;
}

inline void write_velocity_csv(const VelocitySeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_velocity_csv: cannot open " + path);
  out << "t,v\n";
  for (std::size_t i = 0; i < series.t.size(); ++i)
    out << format_number(series.t[i]) << ',' << format_number(series.v[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Minimal SVG polyline plotter. Plots are a convenience; CSV is the contract.
// ---------------------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

inline void write_svg_plot(const std::vector<PlotSeries>& series, const std::string& path,
                           const std::string& x_label, const std::string& y_label,
                           int width = 900, int height = 500) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (double x : s.x) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    for (double y : s.y) {
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  double pad_y = 0.05 * (ymax - ymin);
  ymin -= pad_y;
  ymax += pad_y;
  const int ml = 60, mr = 20, mt = 20, mb = 45;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
  auto py = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_svg_plot: cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr << "' y2='"
      << height - mb << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << height - mb
      << "' stroke='black'/>\n";
  for (int i = 0; i <= 5; ++i) {
    double xv = xmin + (xmax - xmin) * i / 5.0;
    double yv = ymin + (ymax - ymin) * i / 5.0;
    out << "<text x='" << px(xv) << "' y='" << height - mb + 18
        << "' font-size='11' text-anchor='middle'>" << std::setprecision(5) << xv << "</text>\n";
    out << "<text x='" << ml - 6 << "' y='" << py(yv) + 4
        << "' font-size='11' text-anchor='end'>" << std::setprecision(5) << yv << "</text>\n";
  }
  out << "<text x='" << (ml + width - mr) / 2 << "' y='" << height - 8
      << "' font-size='13' text-anchor='middle'>" << x_label << "</text>\n";
  out << "<text x='14' y='" << (mt + height - mb) / 2
      << "' font-size='13' text-anchor='middle' transform='rotate(-90 14 "
      << (mt + height - mb) / 2 << ")'>" << y_label << "</text>\n";
  int legend_y = mt + 14;
  for (const auto& s : series) {
    out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    out << "'/>\n";
    out << "<text x='" << width - mr - 150 << "' y='" << legend_y << "' font-size='12' fill='"
        << s.color << "'>" << s.label << "</text>\n";
    legend_y += 16;
  }
  out << "</svg>\n";
}

}  // namespace pacer
