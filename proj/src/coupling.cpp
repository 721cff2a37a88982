#include "imitatio/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "imitatio/errors.hpp"
#include "json.hpp"

namespace imitatio {

int apply_coupling(const StochasticMatrix& matrix, int state, double u) {
  const int n = int(matrix.size());
  double cum = 0.0;
  for (int j = 0; j < n; ++j) {
    cum += matrix(std::size_t(state), std::size_t(j));
    if (u < cum) return j;
  }
  return n - 1;  // rounding slack at the top of the CDF
}

int compose_coupling(const ImitationKernel& kernel, const Word& word, int state,
                     const std::vector<double>& us) {
  if (word.size() != us.size())
    throw PreconditionError("compose_coupling: word and uniform counts differ");
  int g = state;
  for (std::size_t i = word.size(); i-- > 0;)
    g = apply_coupling(kernel.matrix_at(word[i]), g, us[i]);
  return g;
}

namespace {

// Max-product reachability over words of exact depth d, peeled at the
// deepest letter: V(d)(i,j) = max_k max_m P_(k)(i,m) V(d-k)(m,j).
// Tail letters all share one matrix, so the max over them collapses to a
// prefix maximum over remainder depths.

struct Search {
  const ImitationKernel& kernel;
  int n;
  bool tail;
  std::int64_t start = 0;  // tail start when present

  explicit Search(const ImitationKernel& k)
      : kernel(k), n(int(k.states())), tail(k.has_tail()) {
    if (tail) start = k.tail()->start;
  }
};

}  // namespace

DoeblinCertificate doeblin_certificate(const ImitationKernel& kernel,
                                       std::optional<std::int64_t> depth_cap) {
  auto report = uniqueness_verdict(kernel);
  if (report.verdict != Verdict::Unique)
    throw PreconditionError("doeblin_certificate: kernel verdict is " +
                            to_string(report.verdict) +
                            "; regeneration requires Unique");

  Search s(kernel);
  const int n = s.n;
  const auto& sup = kernel.support();
  const std::int64_t maxk = kernel.max_finite_depth();
  const std::int64_t window = s.tail ? s.start : maxk;
  const std::int64_t cap = depth_cap.value_or(
      10 * std::int64_t(n) * std::int64_t(n) * (s.tail ? s.start + 1 : maxk));
  if (cap < 1)
    throw PreconditionError("doeblin_certificate: depth cap must be positive");

  // Phase 1: rolling full matrices to locate the smallest feasible depth
  // and the target column. Ring holds V(d) for the last window+1 depths.
  const std::size_t nn = std::size_t(n) * std::size_t(n);
  std::vector<std::vector<double>> ring(std::size_t(window) + 1,
                                        std::vector<double>(nn, 0.0));
  for (int i = 0; i < n; ++i) ring[0][std::size_t(i) * n + i] = 1.0;
  std::vector<double> prefix_max(nn, 0.0);  // max over d <= depth-start of V(d)

  auto slot = [&](std::int64_t d) { return std::size_t(d % (window + 1)); };

  std::int64_t n0 = -1;
  int target = -1;
  for (std::int64_t d = 1; d <= cap; ++d) {
    if (s.tail && d - s.start >= 0) {
      const auto& v = ring[slot(d - s.start)];
      for (std::size_t x = 0; x < nn; ++x)
        prefix_max[x] = std::max(prefix_max[x], v[x]);
    }
    auto& cur = ring[slot(d)];
    std::fill(cur.begin(), cur.end(), 0.0);
    for (const auto& e : sup) {
      if (e.k > d) break;
      const auto& prev = ring[slot(d - e.k)];
      for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m) {
          double p = e.matrix(std::size_t(i), std::size_t(m));
          if (p <= 0.0) continue;
          for (int j = 0; j < n; ++j)
            cur[std::size_t(i) * n + j] =
                std::max(cur[std::size_t(i) * n + j],
                         p * prev[std::size_t(m) * n + j]);
        }
    }
    if (s.tail && d >= s.start) {
      const auto& t = kernel.tail()->matrix;
      for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m) {
          double p = t(std::size_t(i), std::size_t(m));
          if (p <= 0.0) continue;
          for (int j = 0; j < n; ++j)
            cur[std::size_t(i) * n + j] =
                std::max(cur[std::size_t(i) * n + j],
                         p * prefix_max[std::size_t(m) * n + j]);
        }
    }
    double best_quality = 0.0;
    int best_column = -1;
    for (int j = 0; j < n; ++j) {
      double q = 1.0;  // min over i of column j: the guaranteed floor
      for (int i = 0; i < n; ++i)
        q = std::min(q, cur[std::size_t(i) * n + j]);
      if (q > best_quality) {
        best_quality = q;
        best_column = j;
      }
    }
    if (best_column >= 0) {
      n0 = d;
      target = best_column;
      break;
    }
  }
  if (n0 < 0)
    throw Error("doeblin_certificate: no common regeneration depth within cap " +
                std::to_string(cap));

  // Phase 2: single-column recursion for the chosen target, all depths
  // kept so witnesses can be read back.
  std::vector<std::vector<double>> c(std::size_t(n0) + 1,
                                     std::vector<double>(std::size_t(n), 0.0));
  c[0][std::size_t(target)] = 1.0;
  std::vector<std::vector<double>> pc;
  std::vector<std::vector<std::int64_t>> apc;  // depth achieving the prefix max
  if (s.tail) {
    pc.assign(std::size_t(n0) + 1, std::vector<double>(std::size_t(n), 0.0));
    apc.assign(std::size_t(n0) + 1,
               std::vector<std::int64_t>(std::size_t(n), 0));
    pc[0] = c[0];
  }
  for (std::int64_t d = 1; d <= n0; ++d) {
    auto& cd = c[std::size_t(d)];
    for (const auto& e : sup) {
      if (e.k > d) break;
      const auto& prev = c[std::size_t(d - e.k)];
      for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m)
          cd[std::size_t(i)] =
              std::max(cd[std::size_t(i)],
                       e.matrix(std::size_t(i), std::size_t(m)) *
                           prev[std::size_t(m)]);
    }
    if (s.tail && d >= s.start) {
      const auto& t = kernel.tail()->matrix;
      const auto& pm = pc[std::size_t(d - s.start)];
      for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m)
          cd[std::size_t(i)] = std::max(
              cd[std::size_t(i)], t(std::size_t(i), std::size_t(m)) *
                                      pm[std::size_t(m)]);
    }
    if (s.tail) {
      for (int m = 0; m < n; ++m) {
        if (cd[std::size_t(m)] > pc[std::size_t(d - 1)][std::size_t(m)]) {
          pc[std::size_t(d)][std::size_t(m)] = cd[std::size_t(m)];
          apc[std::size_t(d)][std::size_t(m)] = d;
        } else {
          pc[std::size_t(d)][std::size_t(m)] =
              pc[std::size_t(d - 1)][std::size_t(m)];
          apc[std::size_t(d)][std::size_t(m)] =
              apc[std::size_t(d - 1)][std::size_t(m)];
        }
      }
    }
  }

  DoeblinCertificate cert;
  cert.target = target;
  cert.n0_bar = n0;
  cert.words.resize(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    Word reversed;  // deepest letter first while unwinding
    int curs = i;
    std::int64_t d = n0;
    while (d > 0) {
      double best = 0.0;
      std::int64_t letter = -1, next_d = -1;
      int next_m = -1;
      for (const auto& e : sup) {
        if (e.k > d) break;
        for (int m = 0; m < n; ++m) {
          double v = e.matrix(std::size_t(curs), std::size_t(m)) *
                     c[std::size_t(d - e.k)][std::size_t(m)];
          if (v > best) {
            best = v;
            letter = e.k;
            next_m = m;
            next_d = d - e.k;
          }
        }
      }
      if (s.tail && d >= s.start) {
        const auto& t = kernel.tail()->matrix;
        for (int m = 0; m < n; ++m) {
          double v = t(std::size_t(curs), std::size_t(m)) *
                     pc[std::size_t(d - s.start)][std::size_t(m)];
          if (v > best) {
            std::int64_t rem = apc[std::size_t(d - s.start)][std::size_t(m)];
            best = v;
            letter = d - rem;
            next_m = m;
            next_d = rem;
          }
        }
      }
      if (letter < 0)
        throw Error("doeblin_certificate: witness reconstruction failed");
      reversed.push_back(letter);
      curs = next_m;
      d = next_d;
    }
    std::reverse(reversed.begin(), reversed.end());
    cert.words[std::size_t(i)] = std::move(reversed);
  }

  std::set<Word> distinct(cert.words.begin(), cert.words.end());
  cert.rho_bar = 0.0;
  for (const auto& b : distinct) cert.rho_bar += word_theta(kernel, b);
  StochasticMatrix q(std::size_t(n), 0.0);
  for (const auto& b : distinct)
    q.add_scaled(word_matrix(kernel, b), word_theta(kernel, b) / cert.rho_bar);
  cert.q_bar = q;

  cert.epsilon = 1.0;
  for (int i = 0; i < n; ++i) {
    auto m = word_matrix(kernel, cert.words[std::size_t(i)]);
    cert.epsilon =
        std::min(cert.epsilon, m(std::size_t(i), std::size_t(target)));
  }
  cert.epsilon_star = 1.0;
  for (int i = 0; i < n; ++i)
    cert.epsilon_star =
        std::min(cert.epsilon_star, q(std::size_t(i), std::size_t(target)));

  if (!(cert.epsilon > 0.0) || !(cert.epsilon_star > 0.0) ||
      !(cert.rho_bar > 0.0) || cert.rho_bar > 1.0 + 1e-9)
    throw Error("doeblin_certificate: inconsistent certificate");
  return cert;
}

int star_coupling(const DoeblinCertificate& cert, int state, double u) {
  const int n = int(cert.q_bar.size());
  double cum = cert.q_bar(std::size_t(state), std::size_t(cert.target));
  if (u < cum) return cert.target;
  int last = cert.target;
  for (int h = 0; h < n; ++h) {
    if (h == cert.target) continue;
    cum += cert.q_bar(std::size_t(state), std::size_t(h));
    last = h;
    if (u < cum) return h;
  }
  return last;
}

std::string certificate_to_json(const DoeblinCertificate& cert) {
  nlohmann::ordered_json j;
  j["target"] = cert.target + 1;
  j["n0_bar"] = cert.n0_bar;
  j["epsilon"] = cert.epsilon;
  j["rho_bar"] = cert.rho_bar;
  j["epsilon_star"] = cert.epsilon_star;
  j["words"] = nlohmann::ordered_json::array();
  for (const auto& w : cert.words) j["words"].push_back(w);
  j["q_bar"] = cert.q_bar.to_rows();
  return j.dump(2) + "\n";
}

void WordTrie::insert(const Word& word) {
  int node = 0;
  for (auto it = word.rbegin(); it != word.rend(); ++it) {
    auto found = nodes_[std::size_t(node)].next.find(*it);
    if (found == nodes_[std::size_t(node)].next.end()) {
      nodes_.push_back({});
      found = nodes_[std::size_t(node)]
                  .next.emplace(*it, int(nodes_.size()) - 1)
                  .first;
    }
    node = found->second;
  }
  if (!nodes_[std::size_t(node)].terminal) {
    nodes_[std::size_t(node)].terminal = true;
    ++words_;
  }
}

bool WordTrie::matches_suffix(const std::vector<std::int64_t>& buffer) const {
  int node = 0;
  for (auto it = buffer.rbegin(); it != buffer.rend(); ++it) {
    auto found = nodes_[std::size_t(node)].next.find(*it);
    if (found == nodes_[std::size_t(node)].next.end()) return false;
    node = found->second;
    if (nodes_[std::size_t(node)].terminal) return true;
  }
  return false;
}

}  // namespace imitatio
