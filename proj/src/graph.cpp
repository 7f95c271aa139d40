#include "gfmate/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string_view>

#include "gfmate/error.hpp"
#include "gfmate/rng.hpp"

namespace gfmate {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string where(const std::filesystem::path& p, std::size_t line) {
  return p.string() + ":" + std::to_string(line);
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  token = trim(token);
  if (token.empty()) return false;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if constexpr (std::is_floating_point_v<T>) {
    if (*first == '+') ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                  : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::ifstream open_or_fail(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorKind::io, "cannot open " + p.string());
  return in;
}

DenseMatrix read_features(const std::filesystem::path& path, bool header) {
  auto in = open_or_fail(path);
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    if (header && lineno == 1) continue;
    const auto fields = split_on(body, ',');
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols)
      fail(ErrorKind::parse, where(path, lineno) + ": expected " + std::to_string(cols) +
                                 " columns, got " + std::to_string(fields.size()));
    for (const auto f : fields) {
      double v = 0.0;
      if (!parse_number(f, v) || !std::isfinite(v))
        fail(ErrorKind::parse, where(path, lineno) + ": bad feature value '" + std::string(f) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  return DenseMatrix(rows, cols, std::move(values));
}

}  // namespace

void Graph::validate() const {
  if (features.rows() != num_nodes)
    fail(ErrorKind::shape, "graph '" + domain_id + "': " + std::to_string(features.rows()) +
                               " feature rows for " + std::to_string(num_nodes) + " nodes");
  for (const auto& e : edges) {
    if (e.src >= num_nodes || e.dst >= num_nodes)
      fail(ErrorKind::index, "graph '" + domain_id + "': edge (" + std::to_string(e.src) + ", " +
                                 std::to_string(e.dst) + ") out of range");
    if (e.src == e.dst) fail(ErrorKind::index, "graph '" + domain_id + "': stored self-loop");
  }
  if (!labels.empty()) {
    if (labels.size() != num_nodes) fail(ErrorKind::shape, "graph '" + domain_id + "': label count");
    for (const ClassId y : labels)
      if (y != kNoLabel && (y < 0 || static_cast<std::size_t>(y) >= num_classes))
        fail(ErrorKind::index, "graph '" + domain_id + "': label " + std::to_string(y) +
                                   " outside [0, " + std::to_string(num_classes) + ")");
  }
}

std::vector<Edge> canonical_edges(std::vector<Edge> edges) {
  std::erase_if(edges, [](const Edge& e) { return e.src == e.dst; });
  for (auto& e : edges)
    if (e.src > e.dst) std::swap(e.src, e.dst);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

Graph load_edge_list(const std::filesystem::path& edge_path,
                     const std::filesystem::path& feature_path,
                     const std::filesystem::path& label_path, const LoadOptions& opts) {
  Graph g;
  g.domain_id = opts.domain_id.empty() ? edge_path.stem().string() : opts.domain_id;
  g.features = read_features(feature_path, opts.feature_header);
  g.num_nodes = g.features.rows();

  {
    auto in = open_or_fail(edge_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto body = trim(line);
      if (const auto hash = body.find('#'); hash != std::string_view::npos)
        body = trim(body.substr(0, hash));
      if (body.empty()) continue;
      const auto tok = split_ws(body);
      std::uint64_t u = 0, v = 0;
      if (tok.size() != 2 || !parse_number(tok[0], u) || !parse_number(tok[1], v))
        fail(ErrorKind::parse, where(edge_path, lineno) + ": expected 'src dst'");
      if (u >= g.num_nodes || v >= g.num_nodes)
        fail(ErrorKind::index, where(edge_path, lineno) + ": node index out of range for " +
                                   std::to_string(g.num_nodes) + " nodes");
      g.edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
    }
  }
  g.edges = canonical_edges(std::move(g.edges));

  if (!label_path.empty()) {
    auto in = open_or_fail(label_path);
    g.labels.assign(g.num_nodes, kNoLabel);
    std::string line;
    std::size_t lineno = 0;
    ClassId max_label = -1;
    while (std::getline(in, line)) {
      ++lineno;
      const auto body = trim(line);
      if (body.empty()) continue;
      const auto fields = split_on(body, ',');
      std::uint64_t node = 0;
      std::int64_t cls = 0;
      const bool ok = fields.size() == 2 && parse_number(fields[0], node) &&
                      parse_number(fields[1], cls);
      if (!ok) {
        if (lineno == 1) continue;  // header
        fail(ErrorKind::parse, where(label_path, lineno) + ": expected 'node_id,class_index'");
      }
      if (node >= g.num_nodes)
        fail(ErrorKind::index, where(label_path, lineno) + ": node " + std::to_string(node) +
                                   " out of range");
      if (cls < 0) fail(ErrorKind::index, where(label_path, lineno) + ": negative class");
      g.labels[node] = static_cast<ClassId>(cls);
      max_label = std::max(max_label, static_cast<ClassId>(cls));
    }
    g.num_classes = opts.num_classes.value_or(static_cast<std::size_t>(max_label + 1));
  } else {
    g.num_classes = opts.num_classes.value_or(0);
  }
  g.validate();
  return g;
}

CsrAdjacency normalize_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes;
  std::vector<std::vector<NodeId>> nbrs(n);
  for (const auto& e : g.edges) {
    nbrs[e.src].push_back(e.dst);
    nbrs[e.dst].push_back(e.src);
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    nbrs[i].push_back(static_cast<NodeId>(i));
    std::sort(nbrs[i].begin(), nbrs[i].end());
    nbrs[i].erase(std::unique(nbrs[i].begin(), nbrs[i].end()), nbrs[i].end());
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(nbrs[i].size()));
  }

  CsrAdjacency a;
  a.row_ptr.reserve(n + 1);
  a.row_ptr.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const NodeId j : nbrs[i]) {
      a.col_idx.push_back(j);
      // Multiplication commutes bit-exactly, so (i,j) and (j,i) match.
      a.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    a.row_ptr.push_back(a.col_idx.size());
  }
  return a;
}

std::vector<NodeId> FewShotSplit::shot_ids() const {
  std::vector<NodeId> ids;
  for (const auto& [cls, nodes] : shots) ids.insert(ids.end(), nodes.begin(), nodes.end());
  return ids;
}

std::vector<std::size_t> class_counts(const Graph& g) {
  std::vector<std::size_t> counts(g.num_classes, 0);
  for (const ClassId y : g.labels)
    if (y != kNoLabel) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

FewShotSplit sample_few_shot_split(const Graph& g, std::size_t m, std::uint64_t seed) {
  if (m == 0) fail(ErrorKind::invalid_argument, "few-shot split: m must be >= 1");
  if (!g.has_labels()) fail(ErrorKind::invalid_argument, "few-shot split: graph has no labels");

  std::vector<std::vector<NodeId>> by_class(g.num_classes);
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    if (g.labels[i] != kNoLabel) by_class[static_cast<std::size_t>(g.labels[i])].push_back(static_cast<NodeId>(i));

  for (std::size_t c = 0; c < g.num_classes; ++c)
    if (by_class[c].size() < m)
      fail(ErrorKind::insufficient_shots, "few-shot split: class " + std::to_string(c) + " has " +
                                              std::to_string(by_class[c].size()) + " labelled nodes, need " +
                                              std::to_string(m));

  Rng rng(seed);
  FewShotSplit split;
  split.m = m;
  split.seed = seed;
  std::vector<NodeId> rest;
  for (std::size_t c = 0; c < g.num_classes; ++c) {
    auto& pool = by_class[c];
    rng.shuffle(std::span<NodeId>(pool));
    std::vector<NodeId> picked(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(picked.begin(), picked.end());
    split.shots.emplace(static_cast<ClassId>(c), std::move(picked));
    rest.insert(rest.end(), pool.begin() + static_cast<std::ptrdiff_t>(m), pool.end());
  }
  std::sort(rest.begin(), rest.end());
  rng.shuffle(std::span<NodeId>(rest));
  const std::size_t num_val = rest.size() / 10;
  split.val_ids.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(num_val));
  split.test_ids.assign(rest.begin() + static_cast<std::ptrdiff_t>(num_val), rest.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

namespace {

void check_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    fail(ErrorKind::invalid_argument, "perturbation ratio must lie in [0, 1]");
}

}  // namespace

Graph perturb_features(const Graph& g, const std::vector<NodeId>& test_ids, double ratio,
                       std::uint64_t seed) {
  check_ratio(ratio);
  Graph out = g;
  // The epsilon absorbs products like 0.3·10 = 3.0000000000000004.
  const auto count = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(test_ids.size()) - 1e-9));
  if (count == 0) return out;

  Rng rng(seed);
  std::vector<NodeId> chosen = test_ids;
  rng.shuffle(std::span<NodeId>(chosen));
  chosen.resize(count);
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  for (std::size_t i = 0; i < count; ++i) {
    const auto src = g.features.row(chosen[perm[i]]);
    std::copy(src.begin(), src.end(), out.features.row(chosen[i]).begin());
  }
  return out;
}

Graph perturb_edges(const Graph& g, const std::vector<NodeId>& test_ids, double ratio,
                    std::uint64_t seed) {
  check_ratio(ratio);
  Graph out = g;
  if (ratio == 0.0) return out;
  std::vector<bool> is_test(g.num_nodes, false);
  for (const NodeId v : test_ids) is_test[v] = true;
  Rng rng(seed);
  out.edges.clear();
  for (const auto& e : g.edges) {
    if ((is_test[e.src] || is_test[e.dst]) && rng.uniform() < ratio) continue;
    out.edges.push_back(e);
  }
  return out;
}

Graph merge_classes(const Graph& g, const std::set<ClassId>& group_a) {
  if (group_a.empty() || group_a.size() >= g.num_classes)
    fail(ErrorKind::invalid_grouping, "merge_classes: group must be a nonempty proper subset of " +
                                          std::to_string(g.num_classes) + " classes");
  for (const ClassId c : group_a)
    if (c < 0 || static_cast<std::size_t>(c) >= g.num_classes)
      fail(ErrorKind::invalid_grouping, "merge_classes: unknown class " + std::to_string(c));
  Graph out = g;
  out.num_classes = 2;
  for (ClassId& y : out.labels)
    if (y != kNoLabel) y = group_a.contains(y) ? 0 : 1;
  return out;
}

std::set<ClassId> random_class_group(std::size_t num_classes, std::size_t size,
                                     std::uint64_t seed) {
  if (size == 0 || size >= num_classes)
    fail(ErrorKind::invalid_grouping, "class group size must lie in [1, num_classes)");
  std::vector<ClassId> all(num_classes);
  std::iota(all.begin(), all.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<ClassId>(all));
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size)};
}

}  // namespace gfmate
