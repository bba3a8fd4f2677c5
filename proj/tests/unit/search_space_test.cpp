#include <catch2/catch.hpp>

#include <set>
#include <string>

#include "gpnas/search_space.hpp"

using namespace gpnas;
using space::CellGraph;
using space::DropBlocker;
using space::GeneralizedOp;
using space::OpDomain;
using space::SkipPattern;

namespace {

// Independent count of valid n-node patterns by inclusion-exclusion over
// isolated-vertex sets: sum_k (-1)^k C(n,k) 2^C(n-k,2).
long long no_isolated_graph_count(int n) {
  auto choose = [](int a, int b) {
    long long r = 1;
    for (int i = 0; i < b; ++i) r = r * (a - i) / (i + 1);
    return r;
  };
  long long total = 0;
  for (int k = 0; k <= n; ++k) {
    const int m = (n - k) * (n - k - 1) / 2;
    total += (k % 2 ? -1LL : 1LL) * choose(n, k) * (1LL << m);
  }
  return total;
}

}  // namespace

TEST_CASE("generalized operator enumeration", "[search_space]") {
  const auto all = space::enumerate_generalized_ops();
  REQUIRE(all.size() == 156);

  CHECK(all.front() == GeneralizedOp{0, 0, 0});
  CHECK(all.back() == GeneralizedOp{12, 3, 2});

  // lexicographic order and distinctness via the dense id
  for (std::size_t i = 0; i < all.size(); ++i)
    CHECK(all[i].global_id() == static_cast<int>(i));

  // brute-force count over the enumeration: 13 operators x 3 inits
  int relu_count = 0;
  for (const auto& g : all)
    if (space::kActivationNames[g.act] == std::string("relu")) ++relu_count;
  CHECK(relu_count == 39);

  for (const auto& g : all) CHECK(g == GeneralizedOp::from_global_id(g.global_id()));
}

TEST_CASE("reduced operator domains", "[search_space]") {
  const auto full = OpDomain::full();
  CHECK(full.size() == 156);

  const auto d3 = OpDomain::reduced(3);
  REQUIRE(d3.size() == 3);
  CHECK(d3.ops[0] == GeneralizedOp{0, 0, 0});
  CHECK(d3.ops[1] == GeneralizedOp{1, 1, 1});
  CHECK(d3.ops[2] == GeneralizedOp{2, 2, 2});
  CHECK(d3.index_of(d3.ops[2]) == 2);
  CHECK_FALSE(d3.contains(GeneralizedOp{0, 1, 0}));
  CHECK_THROWS_AS(d3.index_of(GeneralizedOp{5, 0, 0}), std::invalid_argument);

  const auto d156 = OpDomain::reduced(156);
  std::set<int> ids;
  for (const auto& g : d156.ops) ids.insert(g.global_id());
  CHECK(ids.size() == 156);

  CHECK_THROWS_AS(OpDomain::reduced(0), std::invalid_argument);
  CHECK_THROWS_AS(OpDomain::reduced(157), std::invalid_argument);
}

TEST_CASE("skip pattern sampling", "[search_space]") {
  Rng rng(99);

  SECTION("two nodes admit exactly one valid pattern") {
    for (int i = 0; i < 20; ++i) {
      const auto p = space::sample_skip_pattern(2, rng);
      REQUIRE(p.bits.size() == 1);
      CHECK(p.edge(0, 1));
      CHECK(p.edge(1, 0));
    }
  }

  SECTION("sampled patterns satisfy the invariants") {
    for (int i = 0; i < 1000; ++i) {
      const auto p = space::sample_skip_pattern(4, rng);
      for (int a = 0; a < 4; ++a) {
        CHECK_FALSE(p.edge(a, a));
        for (int b = 0; b < 4; ++b) CHECK(p.edge(a, b) == p.edge(b, a));
        CHECK(p.degree(a) >= 1);
      }
      CHECK(p.valid());
    }
  }

  SECTION("n_nodes below 2 is rejected") {
    CHECK_THROWS_AS(space::sample_skip_pattern(1, rng), std::invalid_argument);
    CHECK_THROWS_AS(space::sample_skip_pattern(0, rng), std::invalid_argument);
  }
}

TEST_CASE("skip pattern enumeration counts", "[search_space]") {
  CHECK(space::enumerate_skip_patterns(2).size() == 1);
  for (int n = 2; n <= 5; ++n) {
    const auto patterns = space::enumerate_skip_patterns(n);
    CHECK(static_cast<long long>(patterns.size()) == no_isolated_graph_count(n));
    for (const auto& p : patterns) CHECK(p.valid());
  }
}

TEST_CASE("drop blocker", "[search_space]") {
  Rng rng(7);

  SECTION("rate zero is the identity") {
    const auto p = space::sample_skip_pattern(5, rng);
    const auto out = space::apply_drop_blocker(p, DropBlocker{0.0, 0.5, 0}, rng);
    CHECK(out == p);
  }

  SECTION("rate one on two nodes keeps the single edge") {
    SkipPattern p(2);
    p.set_edge(0, 1, true);
    const auto out = space::apply_drop_blocker(p, DropBlocker{1.0, 1.0, 0}, rng);
    CHECK(out == p);
  }

  SECTION("rate decays geometrically and never increases") {
    DropBlocker b{0.9, 0.98, 0};
    double prev = b.current_rate();
    CHECK(prev == Approx(0.9));
    for (int i = 0; i < 200; ++i) {
      b.advance();
      const double r = b.current_rate();
      CHECK(r <= prev);
      prev = r;
    }
    CHECK(b.current_rate() == Approx(0.9 * std::pow(0.98, 200)).epsilon(1e-9));
  }

  SECTION("monte carlo survival rate on the 8-node complete graph") {
    SkipPattern complete(8);
    for (auto& bit : complete.bits) bit = 1;
    const int trials = 10000;
    long long surviving = 0;
    for (int t = 0; t < trials; ++t) {
      const auto out = space::apply_drop_blocker(complete, DropBlocker{0.5, 1.0, 0}, rng);
      surviving += out.edge_count();
      CHECK(out.valid());
      CHECK(out.edge_count() <= complete.edge_count());
    }
    const double fraction =
        static_cast<double>(surviving) / (static_cast<double>(trials) * complete.edge_count());
    CHECK(fraction == Approx(0.5).margin(0.02));
  }

  SECTION("output is always valid and never gains edges") {
    for (int t = 0; t < 500; ++t) {
      const auto p = space::sample_skip_pattern(6, rng);
      const auto out = space::apply_drop_blocker(p, DropBlocker{0.7, 1.0, 0}, rng);
      CHECK(out.valid());
      CHECK(out.edge_count() <= p.edge_count());
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) CHECK(out.edge(a, b) == out.edge(b, a));
    }
  }
}

TEST_CASE("cell encoding round trip", "[search_space]") {
  Rng rng(2024);
  const auto domain = OpDomain::full();

  SECTION("round trip is the identity on valid cells") {
    for (int i = 0; i < 1000; ++i) {
      const int n = rng.uniform_int(2, 7);
      const auto cell = space::uniform_cell(n, domain, rng);
      REQUIRE(cell.valid());
      CHECK(space::decode_cell(space::encode_cell(cell)) == cell);
    }
  }

  SECTION("one changed activation changes the encoding") {
    auto cell = space::uniform_cell(4, domain, rng);
    auto other = cell;
    other.ops[2].act = (other.ops[2].act + 1) % space::kNumActivations;
    CHECK(space::encode_cell(cell) != space::encode_cell(other));
  }

  SECTION("distinct cells yield distinct encodings") {
    std::set<std::string> encodings;
    std::vector<CellGraph> cells;
    for (int i = 0; i < 1000; ++i) {
      auto cell = space::uniform_cell(3, domain, rng);
      bool duplicate = false;
      for (const auto& c : cells) duplicate = duplicate || c == cell;
      if (duplicate) continue;
      cells.push_back(cell);
      encodings.insert(space::encode_cell(cell));
    }
    CHECK(encodings.size() == cells.size());
  }

  SECTION("encoding format is the documented literal") {
    CellGraph cell;
    cell.skip = SkipPattern(3);
    cell.skip.set_edge(0, 1, true);
    cell.skip.set_edge(1, 2, true);
    cell.ops = {GeneralizedOp{0, 0, 0}, GeneralizedOp{5, 1, 2}, GeneralizedOp{12, 3, 1}};
    CHECK(space::encode_cell(cell) == "3|101|0:0:0,5:1:2,12:3:1");
    CHECK(space::encode_skip(cell.skip) == "3|101");
  }

  SECTION("malformed encodings are rejected") {
    CHECK_THROWS_AS(space::decode_cell("3|101"), std::invalid_argument);
    CHECK_THROWS_AS(space::decode_cell("3|10x|0:0:0,0:0:0,0:0:0"), std::invalid_argument);
    CHECK_THROWS_AS(space::decode_cell("3|101|0:0:0,0:0:0"), std::invalid_argument);
    CHECK_THROWS_AS(space::decode_cell("3|101|0:0:0,0:0:0,13:0:0"), std::invalid_argument);
    CHECK_THROWS_AS(space::decode_cell("3|100|0:0:0,0:0:0,0:0:0"), std::invalid_argument);
    CHECK_THROWS_AS(space::decode_skip("1|"), std::invalid_argument);
  }
}
