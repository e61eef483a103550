#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>
#include <random>

#include <nlohmann/json.hpp>

#include "loopmorse/gf2.hpp"
#include "oracles.hpp"

using namespace loopmorse::gf2;

namespace {

BitMatrix from_dense(const oracle::DenseMat& m, int rows, int cols) {
  BitMatrix out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (m[i][j] % 2) out.set(i, j, true);
  return out;
}

oracle::DenseMat random_dense(std::mt19937& rng, int rows, int cols, double p = 0.5) {
  std::bernoulli_distribution bit(p);
  oracle::DenseMat m(rows, std::vector<int>(cols, 0));
  for (auto& row : m)
    for (auto& x : row) x = bit(rng) ? 1 : 0;
  return m;
}

// Random three-degree complex with d^2 = 0: rows of the top boundary are
// sampled from the left null space of the lower one.
oracle::DenseComplex random_complex(std::mt19937& rng, int n0, int n1, int n2) {
  oracle::DenseComplex c;
  c.dims = {{0, n0}, {1, n1}, {2, n2}};
  c.boundary[1] = random_dense(rng, n1, n0);
  auto null = oracle::dense_left_null(c.boundary[1]);
  oracle::DenseMat d2(n2, std::vector<int>(n1, 0));
  std::bernoulli_distribution pick(0.5);
  for (int i = 0; i < n2; ++i)
    for (const auto& v : null)
      if (pick(rng))
        for (int j = 0; j < n1; ++j) d2[i][j] = (d2[i][j] + v[j]) % 2;
  c.boundary[2] = std::move(d2);
  return c;
}

GradedBitComplex to_complex(const oracle::DenseComplex& c, const std::string& prefix) {
  GradedBitComplex out;
  for (const auto& [k, n] : c.dims)
    for (int i = 0; i < n; ++i)
      out.add_generator({prefix + std::to_string(k) + "_" + std::to_string(i), k, ""});
  for (const auto& [k, n] : c.dims) {
    if (n == 0 || c.dim(k - 1) == 0) continue;
    out.set_boundary(k, from_dense(c.bnd(k), n, c.dim(k - 1)));
  }
  return out;
}

GradedBitComplex simplicial_to_complex(const oracle::SimplicialComplex& s,
                                       const std::string& prefix) {
  return to_complex(s.chain_complex(), prefix);
}

}  // namespace

TEST_CASE("bit vectors and matrices round-trip through bitstrings") {
  BitVec v = BitVec::from_string("0110100000000000000000000000000000000000000000000000000000000000011");
  CHECK(v.size() == 67);
  CHECK(v.count() == 5);
  CHECK(v.get(1));
  CHECK(v.get(66));
  CHECK(v.to_string().substr(0, 5) == "01101");

  BitMatrix m = BitMatrix::from_bits(2, 3, "101010");
  CHECK(m.to_bits() == "101010");
  CHECK(m.get(0, 0));
  CHECK_FALSE(m.get(1, 0));
  CHECK_THROWS(BitMatrix::from_bits(2, 2, "101"));
}

TEST_CASE("product and rank agree with dense elimination on random matrices") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 1 + static_cast<int>(rng() % 70);
    int k = 1 + static_cast<int>(rng() % 70);
    int m = 1 + static_cast<int>(rng() % 70);
    auto da = random_dense(rng, n, k);
    auto db = random_dense(rng, k, m);
    BitMatrix a = from_dense(da, n, k);
    BitMatrix b = from_dense(db, k, m);
    CHECK(a.multiplied(b) == from_dense(oracle::dense_product(da, db), n, m));
    CHECK(a.rank() == oracle::dense_rank(da));
  }
}

TEST_CASE("circle complex has one class in degrees 0 and 1") {
  GradedBitComplex c;
  c.add_generator({"min", 0, "minimum"});
  c.add_generator({"max", 1, "maximum"});
  // two gradient lines with opposite orientation cancel mod 2
  CHECK(c.verify_boundary_squared());
  auto ranks = c.homology_ranks();
  CHECK(ranks == std::map<int, int>{{0, 1}, {1, 1}});
}

TEST_CASE("boundary not squaring to zero is rejected") {
  GradedBitComplex c;
  c.add_generator({"a", 0, ""});
  c.add_generator({"b", 1, ""});
  c.add_generator({"cc", 2, ""});
  c.set_boundary_entry("b", "a", true);
  c.set_boundary_entry("cc", "b", true);
  CHECK_FALSE(c.verify_boundary_squared());
  CHECK_THROWS_AS(c.homology_ranks(), std::invalid_argument);
}

TEST_CASE("interval-relative complex: single degree-1 generator") {
  GradedBitComplex c;
  c.add_generator({"top", 1, "interior maximum"});
  CHECK(c.homology_ranks() == std::map<int, int>{{1, 1}});
}

TEST_CASE("homology ranks match dense elimination oracle on random complexes") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    auto dims = [&](int lo, int hi) { return lo + static_cast<int>(rng() % (hi - lo + 1)); };
    auto dc = random_complex(rng, dims(1, 6), dims(1, 6), dims(1, 6));
    REQUIRE(dc.squares_to_zero());
    GradedBitComplex c = to_complex(dc, "g");
    CHECK(c.verify_boundary_squared());
    CHECK(c.homology_ranks() == dc.homology_ranks());
  }
}

TEST_CASE("homology ranks are invariant under generator permutation") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto dc = random_complex(rng, 4, 5, 3);
    GradedBitComplex base = to_complex(dc, "g");
    // Permute the degree-1 generators and the corresponding rows/columns.
    std::vector<int> perm = {0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    oracle::DenseComplex pc = dc;
    for (int i = 0; i < 5; ++i) pc.boundary[1][i] = dc.boundary[1][perm[i]];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 5; ++j) pc.boundary[2][i][j] = dc.boundary[2][i][perm[j]];
    GradedBitComplex permuted = to_complex(pc, "p");
    CHECK(base.homology_ranks() == permuted.homology_ranks());
  }
}

TEST_CASE("tensor with a point is the identity on ranks; interval shifts by one") {
  std::mt19937 rng(11);
  auto dc = random_complex(rng, 3, 4, 2);
  GradedBitComplex a = to_complex(dc, "a");

  GradedBitComplex point;
  point.add_generator({"pt", 0, "point"});
  CHECK(tensor_complex(a, point).homology_ranks() == a.homology_ranks());

  GradedBitComplex interval_rel;
  interval_rel.add_generator({"top", 1, ""});
  auto shifted = tensor_complex(a, interval_rel).homology_ranks();
  std::map<int, int> expected;
  for (auto [k, r] : a.homology_ranks()) expected[k + 1] = r;
  CHECK(shifted == expected);
}

TEST_CASE("tensor complex satisfies d^2 = 0 and the Kunneth rank convolution") {
  std::mt19937 rng(19);
  for (int trial = 0; trial < 8; ++trial) {
    auto da = random_complex(rng, 3, 3, 2);
    auto db = random_complex(rng, 2, 3, 2);
    GradedBitComplex a = to_complex(da, "a");
    GradedBitComplex b = to_complex(db, "b");
    GradedBitComplex t = tensor_complex(a, b);
    REQUIRE(t.verify_boundary_squared());
    // Over a field the ranks of the tensor complex convolve.
    auto ra = a.homology_ranks(), rb = b.homology_ranks();
    std::map<int, int> conv;
    for (auto [i, x] : ra)
      for (auto [j, y] : rb) conv[i + j] += x * y;
    for (auto it = conv.begin(); it != conv.end();)
      it = it->second == 0 ? conv.erase(it) : std::next(it);
    CHECK(t.homology_ranks() == conv);
  }
}

TEST_CASE("chain-map verification accepts identities and rejects a hand-built failure") {
  auto mk = [] {
    GradedBitComplex c;
    c.add_generator({"a", 1, ""});
    c.add_generator({"b", 0, ""});
    c.set_boundary_entry("a", "b", true);
    return c;
  };
  auto src = std::make_shared<GradedBitComplex>(mk());
  auto tgt = std::make_shared<GradedBitComplex>(mk());

  ParityChainMap id(src, tgt, 0);
  id.set_entry("a", "a", true);
  id.set_entry("b", "b", true);
  CHECK(id.is_chain_map());

  // Send a -> a but kill b: m(da) = b while d(m a) = b fails on the other slot.
  ParityChainMap bad(src, tgt, 0);
  bad.set_entry("a", "a", true);
  CHECK_FALSE(bad.is_chain_map());
  CHECK_THROWS_AS(bad.induced_on_homology(homology_basis(*src), homology_basis(*tgt)),
                  std::invalid_argument);
}

TEST_CASE("sum of chain maps is a chain map") {
  std::mt19937 rng(23);
  auto dc = random_complex(rng, 3, 4, 2);
  auto src = std::make_shared<GradedBitComplex>(to_complex(dc, "g"));
  auto tgt = src;

  ParityChainMap id(src, tgt, 0);
  for (int i = 0; i < src->generator_count(); ++i)
    id.set_entry(src->generator(i).id, src->generator(i).id, true);
  REQUIRE(id.is_chain_map());

  // Boundary itself, viewed as a degree -1 chain map, commutes with d.
  ParityChainMap bd(src, tgt, -1);
  for (int k = 1; k <= src->max_degree(); ++k)
    if (src->generator_count(k) > 0 && src->generator_count(k - 1) > 0)
      bd.set_block(k, src->boundary(k));
  REQUIRE(bd.is_chain_map());

  CHECK((id ^ id).is_chain_map());
  CHECK((bd ^ bd).is_chain_map());
  // f + g for two genuinely different chain maps with matching shift.
  ParityChainMap zero(src, tgt, 0);
  CHECK((id ^ zero).is_chain_map());
}

TEST_CASE("identity map induces identity on homology") {
  std::mt19937 rng(29);
  auto dc = random_complex(rng, 4, 5, 3);
  auto c = std::make_shared<GradedBitComplex>(to_complex(dc, "g"));
  ParityChainMap id(c, c, 0);
  for (int i = 0; i < c->generator_count(); ++i)
    id.set_entry(c->generator(i).id, c->generator(i).id, true);
  auto basis = homology_basis(*c);
  auto induced = id.induced_on_homology(basis, basis);
  for (const auto& [k, reps] : basis.reps) {
    if (reps.empty()) continue;
    CHECK(induced.at(k) == BitMatrix::identity(static_cast<int>(reps.size())));
  }
}

TEST_CASE("simplicial circle maps: squaring kills degree-1 homology, antipodal preserves it") {
  // Oracle derivation: the image of the fundamental cycle of the 6-gon under
  // the vertex map i -> i mod 3 covers each edge of the 3-gon twice (0 mod 2);
  // under i -> i+3 it covers each edge of the 6-gon once.
  oracle::SimplicialComplex hexagon = oracle::circle_complex(6);
  oracle::SimplicialComplex triangle = oracle::circle_complex(3);
  std::vector<int> square_map = {0, 1, 2, 0, 1, 2};
  std::vector<int> antipodal_map = {3, 4, 5, 0, 1, 2};
  CHECK(oracle::circle_map_degree_mod2(hexagon, triangle, square_map) == 0);
  CHECK(oracle::circle_map_degree_mod2(hexagon, hexagon, antipodal_map) == 1);

  // The same answers through the chain-map machinery.
  auto src = std::make_shared<GradedBitComplex>(simplicial_to_complex(hexagon, "h"));
  auto tgt3 = std::make_shared<GradedBitComplex>(simplicial_to_complex(triangle, "t"));
  auto tgt6 = std::make_shared<GradedBitComplex>(simplicial_to_complex(hexagon, "h"));

  auto build_map = [&](const oracle::SimplicialComplex& s, const oracle::SimplicialComplex& t,
                       std::shared_ptr<const GradedBitComplex> sc,
                       std::shared_ptr<const GradedBitComplex> tc,
                       const std::vector<int>& vm, const std::string& tp) {
    ParityChainMap f(sc, tc, 0);
    for (int k = 0; k <= 1; ++k)
      for (std::size_t i = 0; i < s.simplices.at(k).size(); ++i) {
        oracle::Simplex im;
        for (int v : s.simplices.at(k)[i]) im.push_back(vm[v]);
        std::sort(im.begin(), im.end());
        im.erase(std::unique(im.begin(), im.end()), im.end());
        if (static_cast<int>(im.size()) != k + 1) continue;  // degenerate: zero
        f.set_entry("h" + std::to_string(k) + "_" + std::to_string(i),
                    tp + std::to_string(k) + "_" + std::to_string(t.index_of(im)), true);
      }
    return f;
  };

  ParityChainMap squaring = build_map(hexagon, triangle, src, tgt3, square_map, "t");
  ParityChainMap antipodal = build_map(hexagon, hexagon, src, tgt6, antipodal_map, "h");
  REQUIRE(squaring.is_chain_map());
  REQUIRE(antipodal.is_chain_map());

  auto hb = homology_basis(*src);
  auto tb3 = homology_basis(*tgt3);
  auto tb6 = homology_basis(*tgt6);
  CHECK(squaring.induced_on_homology(hb, tb3).at(1) == BitMatrix(1, 1));
  CHECK(antipodal.induced_on_homology(hb, tb6).at(1) == BitMatrix::identity(1));
  CHECK(squaring.induced_on_homology(hb, tb3).at(0) == BitMatrix::identity(1));
}

TEST_CASE("torus pair relative to the annulus complement has ranks 1 in degrees 1 and 2") {
  auto torus = oracle::torus_complex();
  auto annulus = oracle::torus_annulus_complex();
  // Absolute sanity first.
  CHECK(torus.chain_complex().homology_ranks() ==
        std::map<int, int>{{0, 1}, {1, 2}, {2, 1}});
  CHECK(annulus.chain_complex().homology_ranks() ==
        std::map<int, int>{{0, 1}, {1, 1}});
  auto rel = torus.relative_chain_complex(annulus);
  REQUIRE(rel.squares_to_zero());
  CHECK(rel.homology_ranks() == std::map<int, int>{{1, 1}, {2, 1}});
}

TEST_CASE("composition and tensor of chain maps") {
  auto mk = [](const std::string& p) {
    GradedBitComplex c;
    c.add_generator({p + "a", 1, ""});
    c.add_generator({p + "b", 0, ""});
    c.set_boundary_entry(p + "a", p + "b", true);
    return std::make_shared<GradedBitComplex>(c);
  };
  auto c1 = mk("x"), c2 = mk("y"), c3 = mk("z");
  auto ident = [](auto s, auto t, const std::string& sp, const std::string& tp) {
    ParityChainMap f(s, t, 0);
    f.set_entry(sp + "a", tp + "a", true);
    f.set_entry(sp + "b", tp + "b", true);
    return f;
  };
  ParityChainMap f = ident(c1, c2, "x", "y");
  ParityChainMap g = ident(c2, c3, "y", "z");
  ParityChainMap h = compose(f, g);
  CHECK(h.is_chain_map());
  CHECK(h.block(0) == BitMatrix::identity(1));
  CHECK(h.block(1) == BitMatrix::identity(1));

  auto ts = std::make_shared<GradedBitComplex>(tensor_complex(*c1, *c2));
  auto tt = std::make_shared<GradedBitComplex>(tensor_complex(*c2, *c3));
  ParityChainMap fg = tensor_map(ident(c1, c2, "x", "y"), ident(c2, c3, "y", "z"), ts, tt);
  CHECK(fg.is_chain_map());
  CHECK(fg.block(2) == BitMatrix::identity(1));
  CHECK(fg.block(1) == BitMatrix::identity(2));
}

TEST_CASE("provenance entries survive serialization round trips") {
  auto mk = [] {
    GradedBitComplex c;
    c.add_generator({"a", 1, "saddle"});
    c.add_generator({"b", 0, "sink"});
    c.set_boundary_entry("a", "b", true);
    return std::make_shared<GradedBitComplex>(c);
  };
  auto src = mk(), tgt = mk();
  ParityChainMap f(src, tgt, 0);
  f.set_entry("a", "a", true);
  f.set_entry("b", "b", true);
  f.add_provenance("a", "a", "event-0");
  f.mark_verified(f.is_chain_map());

  nlohmann::json jc = src->to_json();
  GradedBitComplex back = GradedBitComplex::from_json(jc);
  CHECK(back.generator_count() == 2);
  CHECK(back.homology_ranks() == src->homology_ranks());
  CHECK(back.to_json() == jc);

  nlohmann::json jm = f.to_json();
  ParityChainMap fb = ParityChainMap::from_json(jm, src, tgt);
  CHECK(fb.block(0) == f.block(0));
  CHECK(fb.provenance("a", "a") == std::vector<std::string>{"event-0"});
  CHECK(fb.verified_chain_map());
  CHECK(fb.to_json() == jm);
}
