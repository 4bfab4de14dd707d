#include "dimabsa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace dimabsa::metrics {

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

void check_pair(const Eigen::Ref<const Eigen::VectorXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& y,
                Eigen::Index min_len, const char* who) {
  if (x.size() != y.size()) {
    throw StatError(std::string(who) + ": length mismatch (" +
                    std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
  }
  if (x.size() < min_len) {
    throw StatError(std::string(who) + ": needs at least " +
                    std::to_string(min_len) + " values, got " +
                    std::to_string(x.size()));
  }
}

}  // namespace

MomentStats moments(const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& partner) {
  check_pair(x, partner, 1, "moments");
  const double n = static_cast<double>(x.size());
  MomentStats m;
  m.mean = x.mean();
  const Eigen::VectorXd xc = x.array() - m.mean;
  const Eigen::VectorXd pc = partner.array() - partner.mean();
  m.variance = xc.squaredNorm() / n;
  m.covariance = xc.dot(pc) / n;
  return m;
}

double pcc(const Eigen::Ref<const Eigen::VectorXd>& xs,
           const Eigen::Ref<const Eigen::VectorXd>& ys) {
  check_pair(xs, ys, 2, "pcc");
  const Eigen::VectorXd xc = xs.array() - xs.mean();
  const Eigen::VectorXd yc = ys.array() - ys.mean();
  const double sx = xc.norm();
  const double sy = yc.norm();
  if (sx == 0.0 || sy == 0.0) {
    throw StatError("pcc: undefined for a constant input vector");
  }
  return xc.dot(yc) / (sx * sy);
}

double pcc(const std::vector<double>& xs, const std::vector<double>& ys) {
  return pcc(as_vector(xs), as_vector(ys));
}

double ccc(const Eigen::Ref<const Eigen::VectorXd>& preds,
           const Eigen::Ref<const Eigen::VectorXd>& golds) {
  check_pair(preds, golds, 2, "ccc");
  const double n = static_cast<double>(preds.size());
  const double mp = preds.mean();
  const double mg = golds.mean();
  const Eigen::VectorXd pc = preds.array() - mp;
  const Eigen::VectorXd gc = golds.array() - mg;
  const double cov = pc.dot(gc) / n;
  const double var_p = pc.squaredNorm() / n;
  const double var_g = gc.squaredNorm() / n;
  const double denom = var_p + var_g + (mp - mg) * (mp - mg);
  if (denom == 0.0) return 0.0;  // both constant with equal means
  return 2.0 * cov / denom;
}

double ccc(const std::vector<double>& preds, const std::vector<double>& golds) {
  return ccc(as_vector(preds), as_vector(golds));
}

double weighted_ccc(double ccc_v, double ccc_a, double lambda_v,
                    double lambda_a) {
  if (lambda_v < 0.0 || lambda_a < 0.0) {
    throw RangeError("weighted_ccc: negative lambda");
  }
  return lambda_v * ccc_v + lambda_a * ccc_a;
}

double rmse_va(const std::vector<VAPair>& preds,
               const std::vector<VAPair>& golds) {
  if (preds.size() != golds.size()) {
    throw StatError("rmse_va: length mismatch");
  }
  if (preds.empty()) {
    throw StatError("rmse_va: empty input");
  }
  double sum = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const double dv = preds[i].valence - golds[i].valence;
    const double da = preds[i].arousal - golds[i].arousal;
    sum += dv * dv + da * da;
  }
  return std::sqrt(sum / (2.0 * static_cast<double>(preds.size())));
}

DimRmse rmse_per_dim(const std::vector<VAPair>& preds,
                     const std::vector<VAPair>& golds) {
  if (preds.size() != golds.size() || preds.empty()) {
    throw StatError("rmse_per_dim: empty input or length mismatch");
  }
  double sv = 0.0, sa = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const double dv = preds[i].valence - golds[i].valence;
    const double da = preds[i].arousal - golds[i].arousal;
    sv += dv * dv;
    sa += da * da;
  }
  const double n = static_cast<double>(preds.size());
  return {std::sqrt(sv / n), std::sqrt(sa / n)};
}

double va_similarity(const VAPair& pred, const VAPair& gold) {
  const double l1 =
      std::abs(pred.valence - gold.valence) + std::abs(pred.arousal - gold.arousal);
  return std::clamp(1.0 - l1 / 16.0, 0.0, 1.0);
}

double MatchResult::total_weight() const {
  double sum = 0.0;
  for (const auto& m : matches) sum += m.weight;
  return sum;
}

namespace {

// Exact minimum-cost assignment of every row to a distinct column (rows <=
// columns), via the O(n^2 m) potentials formulation. Returns col index per
// row. Deterministic for a fixed input order.
std::vector<int> min_cost_assignment(
    const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const int m = n == 0 ? 0 : static_cast<int>(cost[0].size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

std::string tuple_key(const SentimentTuple& t, Subtask mode) {
  // '\x1f' cannot appear inside JSON string content we load, so the key is
  // collision-free across fields. The NULL sentinel gets its own tag.
  std::string key = t.aspect ? "S" + *t.aspect : "N";
  key += '\x1f';
  if (mode == Subtask::ASQP) {
    key += t.category.value_or("");
    key += '\x1f';
  }
  key += t.opinion ? "S" + *t.opinion : "N";
  return key;
}

void check_mode(const std::vector<SentimentTuple>& tuples, Subtask mode,
                const char* side) {
  if (mode == Subtask::ASR) {
    throw InvariantError("match_tuples: ASR has no tuples to match");
  }
  for (const auto& t : tuples) {
    if (mode == Subtask::ASQP && !t.category) {
      throw InvariantError(std::string("match_tuples: ") + side +
                           " tuple without category in ASQP mode");
    }
    if (mode == Subtask::ASTE && t.category) {
      throw InvariantError(std::string("match_tuples: ") + side +
                           " tuple with category in ASTE mode");
    }
  }
}

}  // namespace

MatchResult match_tuples(const std::vector<SentimentTuple>& preds,
                         const std::vector<SentimentTuple>& golds,
                         Subtask mode, const VaWeightFn& weight) {
  check_mode(preds, mode, "pred");
  check_mode(golds, mode, "gold");

  std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> groups;
  for (int i = 0; i < static_cast<int>(preds.size()); ++i) {
    groups[tuple_key(preds[i], mode)].first.push_back(i);
  }
  for (int j = 0; j < static_cast<int>(golds.size()); ++j) {
    groups[tuple_key(golds[j], mode)].second.push_back(j);
  }

  MatchResult result;
  for (const auto& [key, group] : groups) {
    const auto& [pi, gi] = group;
    if (pi.empty() || gi.empty()) continue;

    // Rows = smaller side, so every row gets assigned (max cardinality;
    // weights are nonnegative, so this is also maximum total weight).
    const bool preds_are_rows = pi.size() <= gi.size();
    const auto& rows = preds_are_rows ? pi : gi;
    const auto& cols = preds_are_rows ? gi : pi;
    std::vector<std::vector<double>> cost(rows.size(),
                                          std::vector<double>(cols.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      for (size_t c = 0; c < cols.size(); ++c) {
        const int p = preds_are_rows ? rows[r] : cols[c];
        const int g = preds_are_rows ? cols[c] : rows[r];
        const double w = weight(preds[p].va, golds[g].va);
        if (w < 0.0 || w > 1.0) {
          throw RangeError("va weight outside [0, 1]");
        }
        cost[r][c] = -w;
      }
    }
    const auto row_to_col = min_cost_assignment(cost);
    for (size_t r = 0; r < rows.size(); ++r) {
      const int c = row_to_col[r];
      const int p = preds_are_rows ? rows[r] : cols[c];
      const int g = preds_are_rows ? cols[c] : rows[r];
      result.matches.push_back({p, g, -cost[r][c]});
    }
  }

  std::sort(result.matches.begin(), result.matches.end(),
            [](const Match& a, const Match& b) {
              return a.pred_index < b.pred_index;
            });
  result.unmatched_pred =
      static_cast<int>(preds.size() - result.matches.size());
  result.unmatched_gold =
      static_cast<int>(golds.size() - result.matches.size());
  return result;
}

std::string ScoreReport::to_text() const {
  std::ostringstream out;
  auto line = [&out](const char* name, const std::optional<double>& v) {
    if (!v) return;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    out << name << ": " << buf << "\n";
  };
  line("RMSE_VA", rmse_va);
  line("PCC_V", pcc_v);
  line("PCC_A", pcc_a);
  line("cP", c_precision);
  line("cR", c_recall);
  line("cF1", c_f1);
  return out.str();
}

ScoreReport continuous_f1(
    const std::vector<std::pair<std::string, std::vector<SentimentTuple>>>&
        preds_by_review,
    const std::vector<std::pair<std::string, std::vector<SentimentTuple>>>&
        golds_by_review,
    Subtask mode, const VaWeightFn& weight) {
  std::map<std::string, const std::vector<SentimentTuple>*> gold_index;
  for (const auto& [id, tuples] : golds_by_review) {
    if (!gold_index.emplace(id, &tuples).second) {
      throw InvariantError("continuous_f1: duplicate gold review ID " + id);
    }
  }

  double total_weight = 0.0;
  size_t total_pred = 0;
  size_t total_gold = 0;
  for (const auto& [id, tuples] : golds_by_review) total_gold += tuples.size();

  static const std::vector<SentimentTuple> kNoTuples;
  std::map<std::string, bool> seen_pred_ids;
  for (const auto& [id, tuples] : preds_by_review) {
    if (!seen_pred_ids.emplace(id, true).second) {
      throw InvariantError("continuous_f1: duplicate predicted review ID " + id);
    }
    total_pred += tuples.size();
    const auto it = gold_index.find(id);
    const auto& gold = it == gold_index.end() ? kNoTuples : *it->second;
    if (tuples.empty() || gold.empty()) continue;
    total_weight += match_tuples(tuples, gold, mode, weight).total_weight();
  }

  const double cp =
      total_pred == 0 ? 0.0 : total_weight / static_cast<double>(total_pred);
  const double cr =
      total_gold == 0 ? 0.0 : total_weight / static_cast<double>(total_gold);
  const double cf1 = cp + cr == 0.0 ? 0.0 : 2.0 * cp * cr / (cp + cr);

  ScoreReport report;
  report.c_precision = cp;
  report.c_recall = cr;
  report.c_f1 = cf1;
  return report;
}

}  // namespace dimabsa::metrics
