#include "slicescope/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "slicescope/error.hpp"
#include "slicescope/rng.hpp"

namespace slicescope {

namespace {

std::vector<std::size_t> rank_descending(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::size_t positive_count(const std::vector<std::uint8_t>& truth) {
  std::size_t count = 0;
  for (std::uint8_t t : truth) count += t != 0;
  return count;
}

}  // namespace

double precision_at_k(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth,
                      std::size_t k) {
  const std::size_t n = scores.size();
  if (truth.size() != n) throw InputError("precision: score and truth lengths differ");
  if (k < 1 || k > n)
    throw InputError("precision: k=" + std::to_string(k) + " out of range for n=" +
                     std::to_string(n));
  if (positive_count(truth) == 0) throw InputError("precision: truth has no positives");
  const std::vector<std::size_t> order = rank_descending(scores);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k; ++r) hits += truth[order[r]] != 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<std::uint8_t>& truth) {
  const std::size_t n = scores.size();
  if (truth.size() != n) throw InputError("precision: score and truth lengths differ");
  const std::size_t positives = positive_count(truth);
  if (positives == 0) throw InputError("precision: truth has no positives");
  const std::vector<std::size_t> order = rank_descending(scores);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (truth[order[r]] == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(positives);
}

SliceReport evaluate_slice(const DatasetBundle& bundle, const KnnGraph& graph,
                           const SliceMask& mask, const EvalConfig& config,
                           const std::vector<double>& scores) {
  const std::size_t n = bundle.n();
  if (mask.n() != n || graph.n != n)
    throw InputError("evaluate: bundle, graph and mask sizes disagree");
  const std::size_t size = mask.size();
  if (size < 1) throw InputError("evaluate: empty slice");
  if (!scores.empty() && scores.size() != n)
    throw InputError("evaluate: score length does not match n");

  SliceReport report;
  report.slice_size = size;

  double loss_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (mask.contains(i)) loss_sum += bundle.losses[i];
  report.mean_loss = loss_sum / static_cast<double>(size);

  if (bundle.outcomes.correct) {
    const auto& correct = *bundle.outcomes.correct;
    std::size_t slice_hits = 0, total_hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total_hits += correct[i] != 0;
      if (mask.contains(i)) slice_hits += correct[i] != 0;
    }
    report.accuracy = static_cast<double>(slice_hits) / static_cast<double>(size);
    report.overall_accuracy = static_cast<double>(total_hits) / static_cast<double>(n);
    report.performance_gap = *report.overall_accuracy - *report.accuracy;
    report.epsilon_satisfied = *report.performance_gap >= config.epsilon;
  }

  report.coherence = coherence_report(bundle.embeddings, graph, mask);

  if (bundle.outcomes.slice_label && positive_count(*bundle.outcomes.slice_label) > 0) {
    std::vector<double> ranking = scores;
    if (ranking.empty()) {
      ranking.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        if (mask.contains(i)) ranking[i] = 1.0;
    }
    for (std::size_t k : config.precision_ks)
      if (k >= 1 && k <= n)
        report.precision_at[k] = precision_at_k(ranking, *bundle.outcomes.slice_label, k);
    report.average_precision = average_precision(ranking, *bundle.outcomes.slice_label);
  }
  return report;
}

namespace {

// One dominant eigenvector of the implicit covariance X'X (X centered),
// starting from a fixed pseudorandom direction. `deflate` holds already
// found components to project out.
struct PowerResult {
  std::vector<double> component;
  double eigenvalue = 0.0;
  bool degenerate = false;
};

PowerResult power_component(const std::vector<double>& centered, std::size_t n, std::size_t d,
                            const std::vector<std::vector<double>>& deflate,
                            const std::vector<double>& deflate_eigen) {
  Rng rng = Rng::stream(0x9C4, deflate.size());
  std::vector<double> v(d);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.uniform(-1.0, 1.0);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;

  std::vector<double> t(n), next(d);
  double eigenvalue = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const double* row = centered.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) acc += row[j] * v[j];
      t[i] = acc;
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = centered.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) next[j] += row[j] * t[i];
    }
    for (std::size_t c = 0; c < deflate.size(); ++c) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += deflate[c][j] * v[j];
      for (std::size_t j = 0; j < d; ++j) next[j] -= deflate_eigen[c] * deflate[c][j] * dot;
    }
    double next_norm = 0.0;
    for (double x : next) next_norm += x * x;
    next_norm = std::sqrt(next_norm);
    if (next_norm < 1e-14) {
      PowerResult out;
      out.component.assign(d, 0.0);
      out.degenerate = true;
      return out;
    }
    double delta = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      next[j] /= next_norm;
      delta = std::max(delta, std::abs(next[j] - v[j]));
    }
    v = next;
    eigenvalue = next_norm;
    if (delta < 1e-9) break;
  }

  // Sign convention: largest-magnitude loading positive.
  std::size_t arg = 0;
  for (std::size_t j = 1; j < d; ++j)
    if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
  if (v[arg] < 0.0)
    for (double& x : v) x = -x;

  PowerResult out;
  out.component = std::move(v);
  out.eigenvalue = eigenvalue;
  return out;
}

}  // namespace

Projection2D project_2d(const EmbeddingSet& embeddings) {
  const std::size_t n = embeddings.n, d = embeddings.d;
  if (n < 2 || d < 2) throw ConfigError("pca: need n >= 2 and d >= 2");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = embeddings.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> centered(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered[i * d + j] = embeddings.at(i, j) - mean[j];

  const PowerResult first = power_component(centered, n, d, {}, {});
  PowerResult second;
  if (first.degenerate) {
    second.component.assign(d, 0.0);
    second.degenerate = true;
  } else {
    second = power_component(centered, n, d, {first.component}, {first.eigenvalue});
    // A second eigenvalue at the level of deflation noise means the data is
    // collinear.
    if (!second.degenerate && second.eigenvalue <= first.eigenvalue * 1e-12) {
      second.component.assign(d, 0.0);
      second.degenerate = true;
    }
  }

  Projection2D out;
  out.pc2_degenerate = second.degenerate;
  out.coords.assign(n * 2, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = centered.data() + i * d;
    double p1 = 0.0, p2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      p1 += row[j] * first.component[j];
      p2 += row[j] * second.component[j];
    }
    out.coords[i * 2] = first.degenerate ? 0.0 : p1;
    out.coords[i * 2 + 1] = second.degenerate ? 0.0 : p2;
  }
  return out;
}

std::string slice_report_to_json(const SliceReport& report) {
  nlohmann::json doc;
  doc["slice_size"] = report.slice_size;
  doc["mean_loss"] = report.mean_loss;
  if (report.accuracy) doc["accuracy"] = *report.accuracy;
  if (report.overall_accuracy) doc["overall_accuracy"] = *report.overall_accuracy;
  if (report.performance_gap) doc["performance_gap"] = *report.performance_gap;
  if (report.epsilon_satisfied) doc["epsilon_satisfied"] = *report.epsilon_satisfied;
  doc["coherence"] = {{"compactness", report.coherence.compactness},
                      {"variance", report.coherence.dispersion.variance},
                      {"mean_abs_dev", report.coherence.dispersion.mean_abs_dev},
                      {"median_abs_dev", report.coherence.dispersion.median_abs_dev},
                      {"iqr", report.coherence.dispersion.iqr}};
  if (!report.precision_at.empty()) {
    nlohmann::json precision;
    for (const auto& [k, value] : report.precision_at) precision[std::to_string(k)] = value;
    doc["precision_at"] = precision;
  }
  if (report.average_precision) doc["average_precision"] = *report.average_precision;
  return doc.dump(2);
}

}  // namespace slicescope
