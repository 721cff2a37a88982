#include "imitatio/structure.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"

namespace imitatio {

std::int64_t word_depth(const Word& word) {
  std::int64_t s = 0;
  for (auto k : word) s += k;
  return s;
}

StochasticMatrix word_matrix(const ImitationKernel& kernel, const Word& word) {
  StochasticMatrix m = StochasticMatrix::identity(kernel.states());
  // Deepest letter is applied first: the product runs last letter to first.
  for (auto it = word.rbegin(); it != word.rend(); ++it) {
    if (it == word.rbegin())
      m = kernel.matrix_at(*it);
    else
      m = m * kernel.matrix_at(*it);
  }
  return m;
}

double word_theta(const ImitationKernel& kernel, const Word& word) {
  double t = 1.0;
  for (auto k : word) t *= kernel.theta_at(k);
  return t;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Unique: return "Unique";
    case Verdict::NonUniquePeriodic: return "NonUniquePeriodic";
    case Verdict::NonUniqueMultipleClasses: return "NonUniqueMultipleClasses";
  }
  return "?";
}

namespace {

// Arc i->j present when any depth's matrix moves mass from i to j.
std::vector<std::vector<int>> support_adjacency(const ImitationKernel& kernel) {
  std::size_t n = kernel.states();
  std::vector<std::vector<char>> seen(n, std::vector<char>(n, 0));
  auto absorb = [&](const StochasticMatrix& m) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (m(i, j) > kPositiveTol) seen[i][j] = 1;
  };
  for (const auto& e : kernel.support()) absorb(e.matrix);
  if (kernel.tail()) absorb(kernel.tail()->matrix);
  std::vector<std::vector<int>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (seen[i][j]) adj[i].push_back(int(j));
  return adj;
}

// Iterative Tarjan; returns the component id of each vertex.
std::vector<int> strongly_connected_components(
    const std::vector<std::vector<int>>& adj, int& count) {
  int n = int(adj.size());
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<int> stack;
  int next_index = 0;
  count = 0;

  struct Frame {
    int v;
    std::size_t child;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call;
    call.push_back({root, 0});
    while (!call.empty()) {
      Frame& f = call.back();
      int v = f.v;
      if (f.child == 0) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      if (f.child < adj[v].size()) {
        int w = adj[v][f.child++];
        if (index[w] == -1) {
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        if (low[v] == index[v]) {
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp[w] = count;
            if (w == v) break;
          }
          ++count;
        }
        call.pop_back();
        if (!call.empty()) {
          int parent = call.back().v;
          low[parent] = std::min(low[parent], low[v]);
        }
      }
    }
  }
  return comp;
}

}  // namespace

Decomposition communicating_decomposition(const ImitationKernel& kernel) {
  auto adj = support_adjacency(kernel);
  int count = 0;
  auto comp = strongly_connected_components(adj, count);

  std::vector<char> closed(count, 1);
  for (std::size_t i = 0; i < adj.size(); ++i)
    for (int j : adj[i])
      if (comp[i] != comp[j]) closed[comp[i]] = 0;

  std::vector<std::vector<int>> members(count);
  for (std::size_t i = 0; i < adj.size(); ++i)
    members[comp[i]].push_back(int(i));

  Decomposition out;
  for (int c = 0; c < count; ++c) {
    if (closed[c])
      out.closed_classes.push_back(members[c]);
    else
      for (int v : members[c]) out.transient.push_back(v);
  }
  std::sort(out.closed_classes.begin(), out.closed_classes.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  std::sort(out.transient.begin(), out.transient.end());
  return out;
}

std::int64_t alphabet_gcd(const ImitationKernel& kernel) {
  std::int64_t d = 0;
  for (const auto& e : kernel.support()) d = std::gcd(d, e.k);
  if (kernel.tail()) {
    d = std::gcd(d, kernel.tail()->start);
    d = std::gcd(d, kernel.tail()->start + 1);
  }
  return d == 0 ? 1 : d;
}

ImitationKernel reduce_kernel(const ImitationKernel& kernel) {
  std::int64_t d = alphabet_gcd(kernel);
  if (kernel.has_tail() && d > 1)
    throw PreconditionError("reduce_kernel: tails never have gcd > 1");
  std::vector<ImitationKernel::SupportEntry> entries;
  for (const auto& e : kernel.support())
    entries.push_back({e.k / d, e.theta, e.matrix});
  ImitationKernel out(kernel.states(), std::move(entries), kernel.tail(),
                      kernel.labels());
  out.finalize();
  return out;
}

Restriction restrict_to_recurrent(const ImitationKernel& kernel) {
  auto decomp = communicating_decomposition(kernel);
  if (decomp.closed_classes.size() != 1)
    throw PreconditionError(
        "restrict_to_recurrent: kernel has " +
        std::to_string(decomp.closed_classes.size()) + " closed classes");
  const auto& kept = decomp.closed_classes.front();
  std::size_t m = kept.size();

  auto restrict_matrix = [&](const StochasticMatrix& full) {
    StochasticMatrix sub(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        sub(i, j) = full(std::size_t(kept[i]), std::size_t(kept[j]));
    sub.renormalize_rows();
    return sub;
  };

  std::vector<ImitationKernel::SupportEntry> entries;
  for (const auto& e : kernel.support())
    entries.push_back({e.k, e.theta, restrict_matrix(e.matrix)});
  std::optional<TailSpec> tail = kernel.tail();
  if (tail) tail->matrix = restrict_matrix(tail->matrix);
  std::vector<std::string> labels;
  if (!kernel.labels().empty())
    for (int v : kept) labels.push_back(kernel.labels()[std::size_t(v)]);

  ImitationKernel out(m, std::move(entries), std::move(tail), std::move(labels));
  out.finalize();
  return {std::move(out), kept};
}

PeriodInfo chain_period_and_partition(const ImitationKernel& kernel) {
  if (alphabet_gcd(kernel) != 1)
    throw PreconditionError(
        "chain_period_and_partition: reduce by the alphabet gcd first");
  auto decomp = communicating_decomposition(kernel);
  if (decomp.closed_classes.size() != 1 || !decomp.transient.empty())
    throw PreconditionError(
        "chain_period_and_partition: kernel must be irreducible; restrict first");

  std::size_t n = kernel.states();
  // Weighted arcs (i, j, depth) of the support graph.
  struct Arc {
    int from, to;
    std::int64_t w;
  };
  std::vector<Arc> arcs;
  std::vector<std::vector<std::pair<int, std::int64_t>>> fwd(n);
  auto absorb = [&](const StochasticMatrix& mtx, std::int64_t w) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (mtx(i, j) > kPositiveTol) {
          arcs.push_back({int(i), int(j), w});
          fwd[i].push_back({int(j), w});
        }
  };
  for (const auto& e : kernel.support()) absorb(e.matrix, e.k);
  if (kernel.tail()) {
    absorb(kernel.tail()->matrix, kernel.tail()->start);
    absorb(kernel.tail()->matrix, kernel.tail()->start + 1);
  }

  // Potentials by forward search from state 0; every arc's closing defect
  // ell(u) + w - ell(v) is a multiple of the period, and their gcd is it.
  std::vector<std::int64_t> ell(n, 0);
  std::vector<char> seen(n, 0);
  std::vector<int> queue{0};
  seen[0] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int u = queue[head];
    for (auto [v, w] : fwd[u])
      if (!seen[v]) {
        seen[v] = 1;
        ell[v] = ell[u] + w;
        queue.push_back(v);
      }
  }

  std::int64_t g = 0;
  for (const auto& a : arcs)
    g = std::gcd(g, std::abs(ell[a.from] + a.w - ell[a.to]));
  if (g == 0) g = 1;

  PeriodInfo out;
  out.period = g;
  out.partition.assign(std::size_t(g), {});
  for (std::size_t v = 0; v < n; ++v) {
    std::int64_t h = ((ell[v] % g) + g) % g;
    out.partition[std::size_t(h)].push_back(int(v));
  }
  return out;
}

StructureReport uniqueness_verdict(const ImitationKernel& kernel) {
  StructureReport report;
  report.d_A = alphabet_gcd(kernel);
  report.decomposition = communicating_decomposition(kernel);
  report.stages.push_back(
      "decomposition: " + std::to_string(report.decomposition.closed_classes.size()) +
      " closed class(es), " + std::to_string(report.decomposition.transient.size()) +
      " transient state(s)");

  if (report.decomposition.closed_classes.size() > 1) {
    report.essentially_irreducible = false;
    report.verdict = Verdict::NonUniqueMultipleClasses;
    report.stages.push_back(
        "multiple closed classes: every mixture of class laws is compatible");
    return report;
  }
  report.essentially_irreducible = true;

  Restriction restricted = restrict_to_recurrent(kernel);
  if (!report.decomposition.transient.empty())
    report.stages.push_back("restricted to the " +
                            std::to_string(restricted.kept.size()) +
                            " recurrent state(s)");

  ImitationKernel work = restricted.kernel;
  if (report.d_A > 1) {
    work = reduce_kernel(work);
    report.stages.push_back("reduced by alphabet gcd " + std::to_string(report.d_A));
  }

  PeriodInfo info = chain_period_and_partition(work);
  // Map partition states back to the original labels.
  for (auto& cls : info.partition)
    for (auto& v : cls) v = restricted.kept[std::size_t(v)];
  report.period = info;
  report.stages.push_back("chain period " + std::to_string(info.period));

  report.verdict =
      info.period == 1 ? Verdict::Unique : Verdict::NonUniquePeriodic;
  return report;
}

std::string structure_report_to_json(const StructureReport& report,
                                     const ImitationKernel& kernel) {
  nlohmann::ordered_json j;
  j["d_A"] = report.d_A;
  auto classes_1based = [](const std::vector<std::vector<int>>& classes) {
    std::vector<std::vector<int>> out;
    for (const auto& c : classes) {
      std::vector<int> v;
      for (int s : c) v.push_back(s + 1);
      out.push_back(std::move(v));
    }
    return out;
  };
  j["closed_classes"] = classes_1based(report.decomposition.closed_classes);
  {
    std::vector<int> t;
    for (int s : report.decomposition.transient) t.push_back(s + 1);
    j["transient"] = t;
  }
  j["essentially_irreducible"] = report.essentially_irreducible;
  if (report.period) {
    j["chain_period"] = report.period->period;
    j["periodic_partition"] = classes_1based(report.period->partition);
  } else {
    j["chain_period"] = nullptr;
    j["periodic_partition"] = nullptr;
  }
  j["verdict"] = to_string(report.verdict);
  j["stages"] = report.stages;
  if (!kernel.labels().empty()) j["state_labels"] = kernel.labels();
  return j.dump(2);
}

}  // namespace imitatio
