#include "roesl/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "roesl/util.hpp"

namespace roesl {

namespace {
constexpr double kTau = 2.0 * std::numbers::pi;
}

KeypointSeq KeypointSeq::from_trajectory(const Trajectory& traj, std::string label) {
  KeypointSeq seq;
  seq.width = 2 * kNumLegs;
  seq.label = std::move(label);
  seq.values.reserve(traj.length() * seq.width);
  for (size_t t = 0; t < traj.length(); ++t) {
    for (int i = 0; i < kNumLegs; ++i) seq.values.push_back(traj.thigh_angles[t][i]);
    for (int i = 0; i < kNumLegs; ++i) seq.values.push_back(traj.contacts[t][i] ? 1.0 : 0.0);
  }
  return seq;
}

KeypointSeq KeypointSeq::from_scalars(const std::vector<double>& xs, std::string label) {
  KeypointSeq seq;
  seq.width = 1;
  seq.values = xs;
  seq.label = std::move(label);
  return seq;
}

const char* dtw_metric_name(DtwMetric m) {
  return m == DtwMetric::kEuclidean ? "euclidean" : "manhattan";
}

namespace {

double step_cost(const KeypointSeq& a, size_t i, const KeypointSeq& b, size_t j, DtwMetric m) {
  const auto x = a.step(i);
  const auto y = b.step(j);
  if (m == DtwMetric::kEuclidean) {
    double s = 0.0;
    for (size_t k = 0; k < x.size(); ++k) {
      const double d = x[k] - y[k];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double s = 0.0;
  for (size_t k = 0; k < x.size(); ++k) s += std::fabs(x[k] - y[k]);
  return s;
}

}  // namespace

DtwResult dtw_distance(const KeypointSeq& a, const KeypointSeq& b, DtwMetric metric) {
  const size_t n = a.length(), m = b.length();
  if (n == 0 || m == 0) throw std::invalid_argument("dtw_distance: empty sequence");
  if (a.width != b.width)
    throw std::invalid_argument("dtw_distance: vector width mismatch (" +
                                std::to_string(a.width) + " vs " + std::to_string(b.width) + ")");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(n * m, kInf);
  auto at = [&](size_t i, size_t j) -> double& { return dp[i * m + j]; };

  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) {
      const double c = step_cost(a, i, b, j, metric);
      double best;
      if (i == 0 && j == 0)
        best = 0.0;
      else if (i == 0)
        best = at(0, j - 1);
      else if (j == 0)
        best = at(i - 1, 0);
      else
        best = std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
      at(i, j) = c + best;
    }
  }

  // Backtrack, preferring the diagonal on ties.
  DtwResult result;
  result.metric = metric;
  result.distance = at(n - 1, m - 1);
  size_t i = n - 1, j = m - 1;
  result.path.push_back({static_cast<int>(i), static_cast<int>(j)});
  while (i > 0 || j > 0) {
    if (i == 0)
      --j;
    else if (j == 0)
      --i;
    else {
      const double diag = at(i - 1, j - 1);
      const double up = at(i - 1, j);
      const double left = at(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left)
        --i;
      else
        --j;
    }
    result.path.push_back({static_cast<int>(i), static_cast<int>(j)});
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

ContactMatrix contact_matrix(const Trajectory& traj) {
  if (traj.contacts.empty()) throw std::invalid_argument("contact_matrix: trajectory logs no contacts");
  ContactMatrix cm;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    cm.rows[leg].resize(traj.contacts.size());
    for (size_t t = 0; t < traj.contacts.size(); ++t) cm.rows[leg][t] = traj.contacts[t][leg] ? 1 : 0;
  }
  return cm;
}

GaitLabel classify_gait(const ContactMatrix& cm, int min_steps) {
  const size_t n = cm.length();
  if (n < static_cast<size_t>(min_steps))
    throw std::invalid_argument("classify_gait: contact matrix too short (" + std::to_string(n) +
                                " steps, need " + std::to_string(min_steps) + ")");

  // Contact onsets per leg.
  std::array<std::vector<size_t>, kNumLegs> onsets;
  for (int leg = 0; leg < kNumLegs; ++leg)
    for (size_t t = 1; t < n; ++t)
      if (cm.rows[leg][t] && !cm.rows[leg][t - 1]) onsets[leg].push_back(t);

  GaitLabel label;
  for (const auto& o : onsets)
    if (o.size() < 2) return label;  // no period estimate possible

  double period_sum = 0.0;
  for (const auto& o : onsets)
    period_sum += static_cast<double>(o.back() - o.front()) / (o.size() - 1);
  const double period = period_sum / kNumLegs;
  if (!(period > 1.0)) return label;

  // Circular mean of onset times mapped onto the estimated cycle.
  std::array<double, kNumLegs> psi{};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    double sx = 0.0, sy = 0.0;
    for (size_t t : onsets[leg]) {
      const double ang = kTau * std::fmod(static_cast<double>(t), period) / period;
      sx += std::cos(ang);
      sy += std::sin(ang);
    }
    psi[leg] = wrap01(std::atan2(sy, sx) / kTau);
  }
  for (int leg = 0; leg < kNumLegs; ++leg) label.offsets[leg] = wrap01(psi[leg] - psi[0]);

  double best_err = std::numeric_limits<double>::infinity();
  for (const auto& skill : all_skills()) {
    double err = 0.0;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const double target = wrap01(skill.offsets[leg] - skill.offsets[0]);
      const double d = circ_dist(label.offsets[leg], target);
      err += d * d;
    }
    err /= kNumLegs;
    if (err < best_err) {
      best_err = err;
      label.name = skill.name;
    }
  }
  label.confidence = std::exp(-40.0 * best_err);
  if (label.confidence < 0.5) label.name = "unknown";
  return label;
}

std::array<std::vector<double>, kNumLegs> joint_trace(const Trajectory& traj, int window) {
  const int n = static_cast<int>(traj.length());
  if (window < 1 || n < window)
    throw std::invalid_argument("joint_trace: trajectory length " + std::to_string(n) +
                                " is shorter than window " + std::to_string(window));
  std::array<std::vector<double>, kNumLegs> out;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    out[leg].reserve(window);
    for (int t = n - window; t < n; ++t) out[leg].push_back(traj.thigh_angles[t][leg]);
  }
  return out;
}

void write_contacts_csv(const ContactMatrix& cm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,fl,fr,rl,rr\n";
  for (size_t t = 0; t < cm.length(); ++t) {
    out << t;
    for (int leg = 0; leg < kNumLegs; ++leg) out << "," << int(cm.rows[leg][t]);
    out << "\n";
  }
}

void write_traces_csv(const std::array<std::vector<double>, kNumLegs>& traces,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,theta_fl,theta_fr,theta_rl,theta_rr\n";
  out.precision(17);
  for (size_t t = 0; t < traces[0].size(); ++t) {
    out << t;
    for (int leg = 0; leg < kNumLegs; ++leg) out << "," << traces[leg][t];
    out << "\n";
  }
}

void write_dtw_csv(const std::vector<std::string>& labels,
                   const std::vector<std::vector<double>>& matrix,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "pair";
  for (const auto& l : labels) out << "," << l;
  out << "\n";
  for (size_t i = 0; i < matrix.size(); ++i) {
    out << labels[i];
    for (double v : matrix[i]) out << "," << v;
    out << "\n";
  }
}

void write_contacts_svg(const ContactMatrix& cm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const size_t n = cm.length();
  const double px = 2.0, row_h = 24.0, gap = 8.0;
  const double width = 60.0 + n * px;
  const double height = kNumLegs * (row_h + gap) + gap;
  static const char* kNames[] = {"FL", "FR", "RL", "RR"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double y = gap + leg * (row_h + gap);
    out << "<text x=\"4\" y=\"" << y + row_h * 0.7 << "\" font-size=\"14\">" << kNames[leg]
        << "</text>\n";
    size_t t = 0;
    while (t < n) {
      if (cm.rows[leg][t]) {
        size_t start = t;
        while (t < n && cm.rows[leg][t]) ++t;
        out << "<rect x=\"" << 50.0 + start * px << "\" y=\"" << y << "\" width=\""
            << (t - start) * px << "\" height=\"" << row_h << "\" fill=\"#3465a4\"/>\n";
      } else {
        ++t;
      }
    }
  }
  out << "</svg>\n";
}

void write_traces_svg(const std::array<std::vector<double>, kNumLegs>& traces,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const size_t n = traces[0].size();
  const double px = 2.0, height = 240.0, mid = height / 2.0;
  double amp = 1e-9;
  for (const auto& tr : traces)
    for (double v : tr) amp = std::max(amp, std::fabs(v));
  const double scale = (height / 2.0 - 10.0) / amp;
  static const char* kColors[] = {"#cc0000", "#3465a4", "#4e9a06", "#f57900"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << n * px << "\" height=\""
      << height << "\">\n";
  out << "<line x1=\"0\" y1=\"" << mid << "\" x2=\"" << n * px << "\" y2=\"" << mid
      << "\" stroke=\"#888\" stroke-dasharray=\"4 4\"/>\n";
  for (int leg = 0; leg < kNumLegs; ++leg) {
    out << "<polyline fill=\"none\" stroke=\"" << kColors[leg] << "\" points=\"";
    for (size_t t = 0; t < n; ++t) out << t * px << "," << mid - traces[leg][t] * scale << " ";
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace roesl
