#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <fstream>
#include <set>
#include <string>

#include <unistd.h>

#include <doctest.h>

#include "gfmate/error.hpp"
#include "gfmate/graph.hpp"
#include "gfmate/synthetic.hpp"
#include "support/generators.hpp"

using namespace gfmate;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("gfmate_graph_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path write(const std::string& name, const std::string& body) const {
    std::ofstream(path / name) << body;
    return path / name;
  }
};

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::io;
}

Graph path_graph(std::size_t n) {
  Graph g = gen::labelled_graph(n, 1);
  for (NodeId i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1});
  return g;
}

}  // namespace

TEST_CASE("minimal two-node files load") {
  TempDir dir;
  const auto e = dir.write("g.edges", "0 1\n");
  const auto f = dir.write("g.feat", "1.0,2.0\n3.0,4.0\n");
  const auto l = dir.write("g.labels", "node,label\n0,0\n1,1\n");
  const Graph g = load_edge_list(e, f, l);
  CHECK(g.num_nodes == 2);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0] == Edge{0, 1});
  CHECK(g.num_classes == 2);
  CHECK(g.features(1, 0) == 3.0);
  CHECK(g.labels == std::vector<ClassId>{0, 1});
}

TEST_CASE("edges are canonicalized: reversed, duplicate and self-loop lines") {
  TempDir dir;
  const auto e = dir.write("g.edges", "# comment\n2 0\n0 2\n1 1\n\n0 1  # trailing\n");
  const auto f = dir.write("g.feat", "0\n0\n0\n");
  const Graph g = load_edge_list(e, f, {});
  CHECK(g.edges == std::vector<Edge>{{0, 1}, {0, 2}});
  CHECK_FALSE(g.has_labels());
}

TEST_CASE("out-of-range endpoint is an index error") {
  TempDir dir;
  const auto e = dir.write("g.edges", "0 1\n5 1\n");
  const auto f = dir.write("g.feat", "0\n0\n0\n");
  CHECK(kind_of([&] { load_edge_list(e, f, {}); }) == ErrorKind::index);
}

TEST_CASE("malformed edge line is a parse error naming the line") {
  TempDir dir;
  const auto e = dir.write("g.edges", "0 1\n1 x\n");
  const auto f = dir.write("g.feat", "0\n0\n0\n");
  try {
    load_edge_list(e, f, {});
    FAIL("no error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::parse);
    CHECK(std::string(err.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("missing file is an io error") {
  CHECK(kind_of([] { load_edge_list("/nonexistent/e", "/nonexistent/f", {}); }) == ErrorKind::io);
}

TEST_CASE("normalized adjacency hand-computed entries") {
  SUBCASE("isolated node") {
    const Graph g = gen::labelled_graph(1, 1);
    const CsrAdjacency a = normalize_adjacency(g);
    CHECK(a.nnz() == 1);
    CHECK(a.at(0, 0) == 1.0);
  }
  SUBCASE("two connected nodes") {
    const CsrAdjacency a = normalize_adjacency(path_graph(2));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(a.at(i, j) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("path 0-1-2") {
    const CsrAdjacency a = normalize_adjacency(path_graph(3));
    CHECK(a.at(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
    CHECK(a.at(0, 1) == doctest::Approx(0.4082).epsilon(1e-4));
    CHECK(a.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a.at(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(a.at(0, 2) == 0.0);
  }
}

TEST_CASE("normalized adjacency is bit-symmetric") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    Graph g = gen::labelled_graph(25, 2);
    g.edges = gen::random_edges(25, 0.2, rng);
    const CsrAdjacency a = normalize_adjacency(g);
    CHECK_NOTHROW(a.validate());
    for (std::size_t i = 0; i < 25; ++i)
      for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
        const double mirrored = a.at(a.col_idx[k], i);
        CHECK(std::memcmp(&mirrored, &a.values[k], sizeof(double)) == 0);
      }
  }
}

TEST_CASE("regular graphs have unit row sums") {
  for (std::size_t n : {5u, 12u, 40u}) {
    Graph ring = gen::labelled_graph(n, 1);
    for (NodeId i = 0; i < n; ++i) ring.edges.push_back({std::min<NodeId>(i, (i + 1) % n), std::max<NodeId>(i, (i + 1) % n)});
    const CsrAdjacency a = normalize_adjacency(ring);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.values[k];
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
  Graph complete = gen::labelled_graph(7, 1);
  for (NodeId u = 0; u < 7; ++u)
    for (NodeId v = u + 1; v < 7; ++v) complete.edges.push_back({u, v});
  const CsrAdjacency a = normalize_adjacency(complete);
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) s += a.values[k];
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("Cornell-sized one-shot split sizes") {
  const Graph g = gen::labelled_graph(183, 5);
  const FewShotSplit s = sample_few_shot_split(g, 1, 0);
  CHECK(s.shot_ids().size() == 5);
  CHECK(s.val_ids.size() == 17);
  CHECK(s.test_ids.size() == 161);
}

TEST_CASE("few-shot split is a deterministic partition") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 2 + rng.below(6);
    const std::size_t n = c * (3 + rng.below(20));
    Graph g = gen::labelled_graph(n, c);
    for (std::size_t i = 0; i < n; i += 7) g.labels[i] = kNoLabel;
    const std::size_t m = 1 + rng.below(2);
    const std::uint64_t seed = rng.next();
    FewShotSplit s;
    try {
      s = sample_few_shot_split(g, m, seed);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::insufficient_shots);
      continue;
    }
    const FewShotSplit again = sample_few_shot_split(g, m, seed);
    CHECK(again.shots == s.shots);
    CHECK(again.val_ids == s.val_ids);
    CHECK(again.test_ids == s.test_ids);

    std::set<NodeId> seen;
    std::size_t total = 0;
    for (const auto& [cls, ids] : s.shots) {
      CHECK(ids.size() == m);
      for (NodeId id : ids) CHECK(g.labels[id] == cls);
      seen.insert(ids.begin(), ids.end());
      total += ids.size();
    }
    seen.insert(s.val_ids.begin(), s.val_ids.end());
    seen.insert(s.test_ids.begin(), s.test_ids.end());
    total += s.val_ids.size() + s.test_ids.size();
    CHECK(seen.size() == total);
    std::size_t labelled = 0;
    for (ClassId l : g.labels) labelled += l != kNoLabel;
    CHECK(total == labelled);
    for (NodeId id : s.test_ids) CHECK(g.labels[id] != kNoLabel);
    CHECK(s.val_ids.size() == (labelled - m * c) / 10);
  }
}

TEST_CASE("split errors") {
  const Graph g = gen::labelled_graph(6, 3);
  CHECK(kind_of([&] { sample_few_shot_split(g, 0, 0); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { sample_few_shot_split(g, 3, 0); }) == ErrorKind::insufficient_shots);
}

TEST_CASE("feature perturbation examples") {
  Rng rng(5);
  Graph g = gen::labelled_graph(10, 2);
  g.features = gen::matrix(10, 3, rng);
  const std::vector<NodeId> all{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  CHECK(perturb_features(g, all, 0.0, 1).features == g.features);

  const std::vector<NodeId> two{3, 8};
  const Graph p2 = perturb_features(g, two, 1.0, 1);
  for (NodeId i = 0; i < 10; ++i)
    if (i != 3 && i != 8) CHECK(std::equal(p2.features.row(i).begin(), p2.features.row(i).end(), g.features.row(i).begin()));
  const bool fixed = std::equal(p2.features.row(3).begin(), p2.features.row(3).end(), g.features.row(3).begin());
  const bool swapped = std::equal(p2.features.row(3).begin(), p2.features.row(3).end(), g.features.row(8).begin());
  CHECK((fixed || swapped));

  // Half of ten test rows: exactly five rows take part. Rows outside the chosen
  // set are untouched and the chosen rows are a permutation of themselves.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Graph p = perturb_features(g, all, 0.5, seed);
    std::multiset<std::vector<double>> before, after;
    std::size_t moved = 0;
    for (NodeId i = 0; i < 10; ++i) {
      std::vector<double> a(g.features.row(i).begin(), g.features.row(i).end());
      std::vector<double> b(p.features.row(i).begin(), p.features.row(i).end());
      before.insert(a);
      after.insert(b);
      moved += a != b;
    }
    CHECK(before == after);
    CHECK(moved <= 5);
  }
}

TEST_CASE("edge perturbation examples") {
  Rng rng(6);
  Graph g = gen::labelled_graph(40, 2);
  g.edges = gen::random_edges(40, 0.15, rng);
  std::vector<NodeId> test;
  for (NodeId i = 0; i < 40; i += 3) test.push_back(i);
  const std::set<NodeId> test_set(test.begin(), test.end());
  auto incident = [&](const Edge& e) { return test_set.count(e.src) || test_set.count(e.dst); };
  std::size_t k = 0;
  for (const auto& e : g.edges) k += incident(e);
  REQUIRE(k > 20);

  CHECK(perturb_edges(g, test, 0.0, 3).edges == g.edges);
  for (const auto& e : perturb_edges(g, test, 1.0, 3).edges) CHECK_FALSE(incident(e));

  // Dropped count summed over 1000 seeds is Binomial(1000·k, 0.3).
  const int seeds = 1000;
  double dropped = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const Graph p = perturb_edges(g, test, 0.3, static_cast<std::uint64_t>(s));
    for (const auto& e : p.edges) CHECK(std::binary_search(g.edges.begin(), g.edges.end(), e));
    dropped += static_cast<double>(g.edges.size() - p.edges.size());
  }
  const double trials = static_cast<double>(seeds) * static_cast<double>(k);
  const double sigma = std::sqrt(trials * 0.3 * 0.7);
  CHECK(std::abs(dropped - 0.3 * trials) <= 3.0 * sigma);
}

TEST_CASE("class merging conserves structure and counts") {
  Rng rng(8);
  Graph g = gen::labelled_graph(30, 3);
  g.features = gen::matrix(30, 4, rng);
  g.edges = gen::random_edges(30, 0.2, rng);
  const Graph m = merge_classes(g, {1});
  CHECK(m.num_classes == 2);
  CHECK(m.num_nodes == g.num_nodes);
  CHECK(m.edges == g.edges);
  CHECK(m.features == g.features);
  const auto before = class_counts(g);
  const auto after = class_counts(m);
  CHECK(after[0] == before[1]);
  CHECK(after[1] == before[0] + before[2]);
  for (ClassId l : m.labels) CHECK((l == 0 || l == 1));

  CHECK(kind_of([&] { merge_classes(g, {0, 1, 2}); }) == ErrorKind::invalid_grouping);
  CHECK(kind_of([&] { merge_classes(g, {}); }) == ErrorKind::invalid_grouping);

  const auto group = random_class_group(7, 4, 11);
  CHECK(group.size() == 4);
  for (ClassId c : group) CHECK((c >= 0 && c < 7));
  CHECK(random_class_group(7, 4, 11) == group);
}

TEST_CASE("SBM generator honours its spec") {
  SbmSpec spec;
  spec.num_nodes = 300;
  spec.num_classes = 3;
  spec.p_in = 0.1;
  spec.p_out = 0.01;
  spec.seed = 4;
  const Graph g = generate_sbm(spec);
  CHECK_NOTHROW(g.validate());
  CHECK(g.features.cols() == spec.feature_dim);
  const auto counts = class_counts(g);
  CHECK(counts == std::vector<std::size_t>{100, 100, 100});
  std::size_t within = 0;
  for (const auto& e : g.edges) within += g.labels[e.src] == g.labels[e.dst];
  const double pairs_in = 3.0 * 100 * 99 / 2, pairs_out = 3.0 * 100 * 100;
  CHECK(std::abs(static_cast<double>(within) - 0.1 * pairs_in) <= 4.0 * std::sqrt(pairs_in * 0.09));
  CHECK(std::abs(static_cast<double>(g.edges.size() - within) - 0.01 * pairs_out) <=
        4.0 * std::sqrt(pairs_out * 0.0099));
  CHECK(generate_sbm(spec).features == g.features);
}
