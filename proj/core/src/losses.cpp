#include <algorithm>
#include <cmath>
#include <limits>

#include "reclink/error.hpp"
#include "reclink/train.hpp"

namespace reclink {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace

LossResult supcon_loss(const Matrix<double>& z, std::span<const std::size_t> classes,
                       double temperature) {
  if (!(temperature > 0.0)) throw UserError("supcon temperature must be > 0");
  const std::size_t n = z.rows;
  if (classes.size() != n) throw UserError("need one class label per embedding");
  if (n < 2) throw UserError("supcon needs a batch of at least two embeddings");

  Matrix<double> sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sim(i, j) = sim(j, i) = dot(z.row(i), z.row(j)) / temperature;
    }
  }

  std::vector<std::size_t> anchors;
  std::vector<std::size_t> positives(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && classes[j] == classes[i]) ++positives[i];
    }
    if (positives[i] > 0) anchors.push_back(i);
  }
  if (anchors.empty()) throw UserError("supcon batch has no anchor with an in-batch positive");

  LossResult out;
  out.grad = Matrix<double>(n, z.cols);
  out.active_terms = anchors.size();
  const double inv_anchors = 1.0 / static_cast<double>(anchors.size());

  std::vector<double> weight(n);
  double total = 0.0;
  for (auto i : anchors) {
    // log-sum-exp over every other batch member
    double max_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) max_sim = std::max(max_sim, sim(i, a));
    }
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(sim(i, a) - max_sim);
    }
    const double lse = max_sim + std::log(denom);

    const double inv_pos = 1.0 / static_cast<double>(positives[i]);
    double pos_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        weight[j] = 0.0;
        continue;
      }
      const bool pos = classes[j] == classes[i];
      if (pos) pos_sum += sim(i, j);
      // d loss_i / d sim(i, j)
      weight[j] = std::exp(sim(i, j) - lse) - (pos ? inv_pos : 0.0);
    }
    total += lse - inv_pos * pos_sum;

    // sim(i, j) = <z_i, z_j> / t feeds both rows.
    const double scale = inv_anchors / temperature;
    for (std::size_t j = 0; j < n; ++j) {
      if (weight[j] == 0.0) continue;
      axpy(scale * weight[j], z.row(j), out.grad.row(i));
      axpy(scale * weight[j], z.row(i), out.grad.row(j));
    }
  }
  out.loss = total * inv_anchors;
  return out;
}

LossResult online_contrastive_loss(const Matrix<double>& z, std::span<const int> labels,
                                   double margin) {
  const std::size_t pairs = labels.size();
  if (z.rows != 2 * pairs) throw UserError("need two embeddings per labelled pair");
  std::vector<double> distance(pairs);
  double max_pos = -std::numeric_limits<double>::infinity();
  double min_neg = std::numeric_limits<double>::infinity();
  bool has_pos = false, has_neg = false;
  for (std::size_t p = 0; p < pairs; ++p) {
    distance[p] = 1.0 - dot(z.row(2 * p), z.row(2 * p + 1));
    if (labels[p] == 1) {
      has_pos = true;
      max_pos = std::max(max_pos, distance[p]);
    } else if (labels[p] == 0) {
      has_neg = true;
      min_neg = std::min(min_neg, distance[p]);
    } else {
      throw UserError("pair labels must be 0 or 1");
    }
  }
  if (!has_pos || !has_neg) {
    throw UserError("online contrastive loss needs at least one positive and one negative pair");
  }

  LossResult out;
  out.grad = Matrix<double>(z.rows, z.cols);
  for (std::size_t p = 0; p < pairs; ++p) {
    const double d = distance[p];
    // d loss / d distance; distance = 1 - <l, r>
    double g = 0.0;
    if (labels[p] == 1 && d > min_neg) {
      out.loss += d * d;
      g = 2.0 * d;
      ++out.active_terms;
    } else if (labels[p] == 0 && d < max_pos) {
      const double slack = std::max(0.0, margin - d);
      out.loss += slack * slack;
      g = -2.0 * slack;
      ++out.active_terms;
    }
    if (g == 0.0) continue;
    axpy(-g, z.row(2 * p + 1), out.grad.row(2 * p));
    axpy(-g, z.row(2 * p), out.grad.row(2 * p + 1));
  }
  return out;
}

}  // namespace reclink
