#include "loopmorse/gf2.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace loopmorse::gf2 {

// ---------------------------------------------------------------------------
// BitVec

BitVec BitVec::from_string(const std::string& bits) {
  BitVec v(static_cast<int>(bits.size()));
  for (int i = 0; i < v.n_; ++i) {
    char c = bits[i];
    if (c != '0' && c != '1') throw std::invalid_argument("BitVec: bad character in bitstring");
    if (c == '1') v.set(i, true);
  }
  return v;
}

BitVec& BitVec::operator^=(const BitVec& o) {
  if (n_ != o.n_) throw std::invalid_argument("BitVec: size mismatch in xor");
  for (std::size_t i = 0; i < w_.size(); ++i) w_[i] ^= o.w_[i];
  return *this;
}

bool BitVec::any() const {
  for (auto w : w_) if (w) return true;
  return false;
}

int BitVec::count() const {
  int c = 0;
  for (auto w : w_) c += __builtin_popcountll(w);
  return c;
}

int BitVec::lowest_set() const {
  for (std::size_t i = 0; i < w_.size(); ++i)
    if (w_[i]) return static_cast<int>(i) * 64 + __builtin_ctzll(w_[i]);
  return -1;
}

std::string BitVec::to_string() const {
  std::string s(n_, '0');
  for (int i = 0; i < n_; ++i) if (get(i)) s[i] = '1';
  return s;
}

// ---------------------------------------------------------------------------
// BitMatrix

BitMatrix BitMatrix::identity(int n) {
  BitMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.set(i, i, true);
  return m;
}

BitMatrix BitMatrix::from_bits(int rows, int cols, const std::string& row_major) {
  if (static_cast<int>(row_major.size()) != rows * cols)
    throw std::invalid_argument("BitMatrix: bitstring length does not match shape");
  BitMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (row_major[i * cols + j] == '1') m.set(i, j, true);
  return m;
}

void BitMatrix::set_row(int i, BitVec v) {
  if (v.size() != cols_) throw std::invalid_argument("BitMatrix: row size mismatch");
  r_[i] = std::move(v);
}

BitMatrix BitMatrix::operator^(const BitMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_)
    throw std::invalid_argument("BitMatrix: shape mismatch in sum");
  BitMatrix out = *this;
  for (int i = 0; i < rows_; ++i) out.r_[i] ^= o.r_[i];
  return out;
}

BitMatrix BitMatrix::multiplied(const BitMatrix& o) const {
  if (cols_ != o.rows_)
    throw std::invalid_argument("BitMatrix: shape mismatch in product");
  BitMatrix out(rows_, o.cols_);
  for (int i = 0; i < rows_; ++i) {
    BitVec acc(o.cols_);
    const BitVec& ri = r_[i];
    for (int k = 0; k < cols_; ++k)
      if (ri.get(k)) acc ^= o.r_[k];
    out.r_[i] = std::move(acc);
  }
  return out;
}

BitMatrix BitMatrix::transposed() const {
  BitMatrix out(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      if (get(i, j)) out.set(j, i, true);
  return out;
}

bool BitMatrix::is_zero() const {
  for (const auto& r : r_) if (r.any()) return false;
  return true;
}

int BitMatrix::rank() const {
  Echelon e;
  int rk = 0;
  for (int i = 0; i < rows_; ++i)
    if (e.insert(r_[i])) ++rk;
  return rk;
}

std::string BitMatrix::to_bits() const {
  std::string s;
  s.reserve(static_cast<std::size_t>(rows_) * cols_);
  for (int i = 0; i < rows_; ++i) s += r_[i].to_string();
  return s;
}

BitVec BitMatrix::apply_from_left(const BitVec& v) const {
  if (v.size() != rows_) throw std::invalid_argument("BitMatrix: vector size mismatch");
  BitVec acc(cols_);
  for (int i = 0; i < rows_; ++i)
    if (v.get(i)) acc ^= r_[i];
  return acc;
}

// ---------------------------------------------------------------------------
// Echelon / null space / quotient coordinates

BitVec Echelon::reduce(BitVec v) const {
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (v.get(pivots_[i])) v ^= rows_[i];
  return v;
}

bool Echelon::insert(BitVec v) {
  v = reduce(std::move(v));
  int p = v.lowest_set();
  if (p < 0) return false;
  rows_.push_back(std::move(v));
  pivots_.push_back(p);
  return true;
}

std::vector<BitVec> null_space_basis(const BitMatrix& m) {
  // Row-reduce m while mirroring the operations on an identity block; rows
  // that vanish certify left-null vectors v with v*M = 0.
  int n = m.rows();
  std::vector<BitVec> work, tag;
  work.reserve(n);
  tag.reserve(n);
  for (int i = 0; i < n; ++i) {
    work.push_back(m.row(i));
    BitVec t(n);
    t.set(i, true);
    tag.push_back(std::move(t));
  }
  std::vector<int> pivot_row;  // indices into work with nonzero pivot
  std::vector<int> pivot_col;
  std::vector<BitVec> null;
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < pivot_row.size(); ++k)
      if (work[i].get(pivot_col[k])) {
        work[i] ^= work[pivot_row[k]];
        tag[i] ^= tag[pivot_row[k]];
      }
    int p = work[i].lowest_set();
    if (p < 0) {
      null.push_back(tag[i]);
    } else {
      pivot_row.push_back(i);
      pivot_col.push_back(p);
    }
  }
  return null;
}

QuotientCoords::QuotientCoords(const std::vector<BitVec>& subspace_span,
                               const std::vector<BitVec>& reps) {
  reps_ = static_cast<int>(reps.size());
  auto insert = [&](BitVec v, BitVec t) -> bool {
    for (std::size_t i = 0; i < rows_.size(); ++i)
      if (v.get(pivots_[i])) {
        v ^= rows_[i];
        t ^= tags_[i];
      }
    int p = v.lowest_set();
    if (p < 0) return false;
    rows_.push_back(std::move(v));
    tags_.push_back(std::move(t));
    pivots_.push_back(p);
    return true;
  };
  for (const auto& v : subspace_span) insert(v, BitVec(reps_));
  for (int r = 0; r < reps_; ++r) {
    BitVec t(reps_);
    t.set(r, true);
    if (!insert(reps[r], std::move(t)))
      throw std::logic_error("QuotientCoords: representatives not independent modulo subspace");
  }
}

BitVec QuotientCoords::coords(const BitVec& z) const {
  BitVec v = z;
  BitVec t(reps_);
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (v.get(pivots_[i])) {
      v ^= rows_[i];
      t ^= tags_[i];
    }
  if (v.any())
    throw std::invalid_argument("QuotientCoords: vector not in subspace + span(reps)");
  return t;
}

// ---------------------------------------------------------------------------
// GradedBitComplex

int GradedBitComplex::add_generator(Generator g) {
  if (by_id_.count(g.id))
    throw std::invalid_argument("GradedBitComplex: duplicate generator id " + g.id);
  int idx = static_cast<int>(gens_.size());
  by_id_[g.id] = idx;
  by_degree_[g.degree].push_back(idx);
  gens_.push_back(std::move(g));
  // Previously materialized boundary shapes are invalidated by new rows/cols.
  boundaries_.clear();
  return idx;
}

int GradedBitComplex::generator_count(int degree) const {
  auto it = by_degree_.find(degree);
  return it == by_degree_.end() ? 0 : static_cast<int>(it->second.size());
}

const std::vector<int>& GradedBitComplex::degree_indices(int degree) const {
  return degree_indices_or_empty(degree);
}

const std::vector<int>& GradedBitComplex::degree_indices_or_empty(int degree) const {
  static const std::vector<int> empty;
  auto it = by_degree_.find(degree);
  return it == by_degree_.end() ? empty : it->second;
}

int GradedBitComplex::position_in_degree(int global_index) const {
  const auto& v = degree_indices_or_empty(gens_.at(global_index).degree);
  auto it = std::find(v.begin(), v.end(), global_index);
  return static_cast<int>(it - v.begin());
}

std::optional<int> GradedBitComplex::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

int GradedBitComplex::min_degree() const {
  if (by_degree_.empty()) return 0;
  return by_degree_.begin()->first;
}

int GradedBitComplex::max_degree() const {
  if (by_degree_.empty()) return 0;
  return by_degree_.rbegin()->first;
}

void GradedBitComplex::set_boundary(int degree, BitMatrix m) {
  if (m.rows() != generator_count(degree) || m.cols() != generator_count(degree - 1))
    throw std::invalid_argument("GradedBitComplex: boundary shape mismatch in degree " +
                                std::to_string(degree));
  boundaries_[degree] = std::move(m);
}

const BitMatrix& GradedBitComplex::boundary(int degree) const {
  auto it = boundaries_.find(degree);
  if (it == boundaries_.end()) {
    auto [jt, _] = boundaries_.emplace(
        degree, BitMatrix(generator_count(degree), generator_count(degree - 1)));
    return jt->second;
  }
  return it->second;
}

void GradedBitComplex::set_boundary_entry(const std::string& from_id,
                                          const std::string& to_id, bool v) {
  auto fi = index_of(from_id), ti = index_of(to_id);
  if (!fi || !ti) throw std::invalid_argument("GradedBitComplex: unknown generator id");
  const Generator& f = gens_[*fi];
  const Generator& t = gens_[*ti];
  if (t.degree != f.degree - 1)
    throw std::invalid_argument("GradedBitComplex: boundary entry must drop degree by one");
  boundary(f.degree);  // materialize
  boundaries_[f.degree].set(position_in_degree(*fi), position_in_degree(*ti), v);
}

bool GradedBitComplex::verify_boundary_squared() const {
  if (by_degree_.empty()) return true;
  for (int k = min_degree() + 2; k <= max_degree(); ++k) {
    if (generator_count(k) == 0 || generator_count(k - 2) == 0) continue;
    if (!boundary(k).multiplied(boundary(k - 1)).is_zero()) return false;
  }
  return true;
}

std::map<int, int> GradedBitComplex::homology_ranks() const {
  if (!verify_boundary_squared())
    throw std::invalid_argument("homology_ranks: boundary does not square to zero");
  std::map<int, int> ranks;
  if (by_degree_.empty()) return ranks;
  for (int k = min_degree(); k <= max_degree(); ++k) {
    int n = generator_count(k);
    if (n == 0) continue;
    int rk_out = (generator_count(k - 1) > 0) ? boundary(k).rank() : 0;
    int rk_in = (generator_count(k + 1) > 0) ? boundary(k + 1).rank() : 0;
    int h = (n - rk_out) - rk_in;
    if (h != 0) ranks[k] = h;
  }
  return ranks;
}

nlohmann::json GradedBitComplex::to_json() const {
  nlohmann::json j;
  j["generators"] = nlohmann::json::array();
  for (const auto& g : gens_)
    j["generators"].push_back({{"id", g.id}, {"degree", g.degree}, {"label", g.label}});
  nlohmann::json b = nlohmann::json::object();
  if (!by_degree_.empty()) {
    for (int k = min_degree(); k <= max_degree(); ++k) {
      if (generator_count(k) == 0 || generator_count(k - 1) == 0) continue;
      b[std::to_string(k)] = boundary(k).to_bits();
    }
  }
  j["boundaries"] = std::move(b);
  return j;
}

GradedBitComplex GradedBitComplex::from_json(const nlohmann::json& j) {
  GradedBitComplex c;
  for (const auto& g : j.at("generators"))
    c.add_generator({g.at("id").get<std::string>(), g.at("degree").get<int>(),
                     g.value("label", std::string())});
  for (const auto& [key, bits] : j.at("boundaries").items()) {
    int k = std::stoi(key);
    c.set_boundary(k, BitMatrix::from_bits(c.generator_count(k), c.generator_count(k - 1),
                                           bits.get<std::string>()));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Tensor complex

GradedBitComplex tensor_complex(const GradedBitComplex& a, const GradedBitComplex& b) {
  GradedBitComplex t;
  if (a.empty() || b.empty()) return t;
  // Degree-ascending insertion; inside a degree, pairs ordered by global indices.
  std::map<int, std::vector<std::pair<int, int>>> pairs;
  for (int ia = 0; ia < a.generator_count(); ++ia)
    for (int ib = 0; ib < b.generator_count(); ++ib)
      pairs[a.generator(ia).degree + b.generator(ib).degree].push_back({ia, ib});
  for (auto& [deg, v] : pairs) {
    std::sort(v.begin(), v.end());
    for (auto [ia, ib] : v) {
      const Generator& ga = a.generator(ia);
      const Generator& gb = b.generator(ib);
      t.add_generator({ga.id + "(x)" + gb.id, deg, ga.label + " (x) " + gb.label});
    }
  }
  // Leibniz rule without signs: d(a(x)b) = da(x)b + a(x)db.
  for (int k = t.min_degree() + 1; k <= t.max_degree(); ++k) {
    if (t.generator_count(k) == 0 || t.generator_count(k - 1) == 0) continue;
    BitMatrix m(t.generator_count(k), t.generator_count(k - 1));
    for (int row = 0; row < t.generator_count(k); ++row) {
      int gi = t.degree_indices(k)[row];
      const std::string& id = t.generator(gi).id;
      auto sep = id.find("(x)");
      int ia = *a.index_of(id.substr(0, sep));
      int ib = *b.index_of(id.substr(sep + 3));
      int da = a.generator(ia).degree;
      int db = b.generator(ib).degree;
      if (da > 0) {
        const BitMatrix& ba = a.boundary(da);
        int ra = a.position_in_degree(ia);
        const auto& lower = a.degree_indices(da - 1);
        for (int c = 0; c < static_cast<int>(lower.size()); ++c)
          if (ba.get(ra, c)) {
            int col = t.position_in_degree(tensor_index(a, b, lower[c], ib));
            m.flip(row, col);
          }
      }
      if (db > 0) {
        const BitMatrix& bb = b.boundary(db);
        int rb = b.position_in_degree(ib);
        const auto& lower = b.degree_indices(db - 1);
        for (int c = 0; c < static_cast<int>(lower.size()); ++c)
          if (bb.get(rb, c)) {
            int col = t.position_in_degree(tensor_index(a, b, ia, lower[c]));
            m.flip(row, col);
          }
      }
    }
    t.set_boundary(k, std::move(m));
  }
  return t;
}

int tensor_index(const GradedBitComplex& a, const GradedBitComplex& b, int ia, int ib) {
  // Recover the insertion position used by tensor_complex.
  int deg = a.generator(ia).degree + b.generator(ib).degree;
  int pos = 0;
  for (int ja = 0; ja < a.generator_count(); ++ja)
    for (int jb = 0; jb < b.generator_count(); ++jb) {
      if (a.generator(ja).degree + b.generator(jb).degree != deg) continue;
      if (std::pair{ja, jb} < std::pair{ia, ib}) ++pos;
    }
  // Convert to a degree-local then, by caller convention, global-equivalent
  // index: generators of one degree are contiguous, so degree-local position
  // suffices for boundary columns; return global index.
  // (Global index = offset of the degree block + pos.)
  // Degree blocks are inserted in ascending degree order.
  int offset = 0;
  // ascending degrees below deg
  // NOTE: tensor_complex inserts degrees in ascending map order.
  // Count generators with smaller degree.
  // a and b are small here; quadratic scan is fine.
  {
    int count = 0;
    for (int ja = 0; ja < a.generator_count(); ++ja)
      for (int jb = 0; jb < b.generator_count(); ++jb)
        if (a.generator(ja).degree + b.generator(jb).degree < deg) ++count;
    offset = count;
  }
  return offset + pos;
}

// ---------------------------------------------------------------------------
// Homology basis

HomologyBasis homology_basis(const GradedBitComplex& c) {
  HomologyBasis out;
  if (c.empty()) return out;
  for (int k = c.min_degree(); k <= c.max_degree(); ++k) {
    int n = c.generator_count(k);
    if (n == 0) continue;
    std::vector<BitVec> cycles;
    if (c.generator_count(k - 1) > 0)
      cycles = null_space_basis(c.boundary(k));
    else
      for (int i = 0; i < n; ++i) {
        BitVec v(n);
        v.set(i, true);
        cycles.push_back(std::move(v));
      }
    std::vector<BitVec> image;
    if (c.generator_count(k + 1) > 0) {
      const BitMatrix& bn = c.boundary(k + 1);
      for (int i = 0; i < bn.rows(); ++i) image.push_back(bn.row(i));
    }
    Echelon e;
    for (const auto& v : image) e.insert(v);
    std::vector<BitVec> reps;
    for (const auto& z : cycles)
      if (e.insert(z)) reps.push_back(z);
    out.coords[k] = QuotientCoords(image, reps);
    out.reps[k] = std::move(reps);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ParityChainMap

ParityChainMap::ParityChainMap(std::shared_ptr<const GradedBitComplex> source,
                               std::shared_ptr<const GradedBitComplex> target,
                               int degree_shift)
    : src_(std::move(source)), tgt_(std::move(target)), shift_(degree_shift) {
  if (!src_ || !tgt_) throw std::invalid_argument("ParityChainMap: null complex");
}

void ParityChainMap::set_block(int degree, BitMatrix m) {
  if (m.rows() != src_->generator_count(degree) ||
      m.cols() != tgt_->generator_count(degree + shift_))
    throw std::invalid_argument("ParityChainMap: block shape mismatch in degree " +
                                std::to_string(degree));
  blocks_[degree] = std::move(m);
  verified_ = false;
}

const BitMatrix& ParityChainMap::block(int degree) const {
  auto it = blocks_.find(degree);
  if (it == blocks_.end()) {
    auto [jt, _] = blocks_.emplace(degree,
                                   BitMatrix(src_->generator_count(degree),
                                             tgt_->generator_count(degree + shift_)));
    return jt->second;
  }
  return it->second;
}

void ParityChainMap::set_entry(const std::string& src_id, const std::string& tgt_id, bool v) {
  auto si = src_->index_of(src_id);
  auto ti = tgt_->index_of(tgt_id);
  if (!si || !ti) throw std::invalid_argument("ParityChainMap: unknown generator id");
  int k = src_->generator(*si).degree;
  if (tgt_->generator(*ti).degree != k + shift_)
    throw std::invalid_argument("ParityChainMap: entry violates degree shift");
  block(k);
  blocks_[k].set(src_->position_in_degree(*si), tgt_->position_in_degree(*ti), v);
  verified_ = false;
}

void ParityChainMap::add_provenance(const std::string& src_id, const std::string& tgt_id,
                                    const std::string& event_id) {
  provenance_[src_id + "->" + tgt_id].push_back(event_id);
}

const std::vector<std::string>& ParityChainMap::provenance(const std::string& src_id,
                                                           const std::string& tgt_id) const {
  static const std::vector<std::string> empty;
  auto it = provenance_.find(src_id + "->" + tgt_id);
  return it == provenance_.end() ? empty : it->second;
}

bool ParityChainMap::is_chain_map() const {
  if (src_->empty()) return true;
  for (int k = src_->min_degree(); k <= src_->max_degree() + 1; ++k) {
    // d_src then map on one side, map then d_tgt on the other.
    int n = src_->generator_count(k);
    if (n == 0) continue;
    BitMatrix lhs(n, tgt_->generator_count(k - 1 + shift_));
    if (src_->generator_count(k - 1) > 0)
      lhs = src_->boundary(k).multiplied(block(k - 1));
    BitMatrix rhs(n, tgt_->generator_count(k - 1 + shift_));
    if (tgt_->generator_count(k + shift_) > 0 && tgt_->generator_count(k - 1 + shift_) > 0)
      rhs = block(k).multiplied(tgt_->boundary(k + shift_));
    if (!(lhs == rhs)) return false;
  }
  return true;
}

ParityChainMap ParityChainMap::operator^(const ParityChainMap& o) const {
  if (src_ != o.src_ || tgt_ != o.tgt_ || shift_ != o.shift_)
    throw std::invalid_argument("ParityChainMap: sum requires identical complexes and shift");
  ParityChainMap out(src_, tgt_, shift_);
  if (!src_->empty())
    for (int k = src_->min_degree(); k <= src_->max_degree(); ++k)
      if (src_->generator_count(k) > 0)
        out.set_block(k, block(k) ^ o.block(k));
  return out;
}

std::map<int, BitMatrix> ParityChainMap::induced_on_homology(
    const HomologyBasis& src_basis, const HomologyBasis& tgt_basis) const {
  if (!is_chain_map())
    throw std::invalid_argument("induced_on_homology: chain-map identity fails");
  std::map<int, BitMatrix> out;
  for (const auto& [k, reps] : src_basis.reps) {
    auto tb = tgt_basis.coords.find(k + shift_);
    int tcount = (tb == tgt_basis.coords.end()) ? 0 : tb->second.rep_count();
    BitMatrix m(static_cast<int>(reps.size()), tcount);
    for (int r = 0; r < static_cast<int>(reps.size()); ++r) {
      BitVec img = block(k).apply_from_left(reps[r]);
      if (tcount > 0) {
        BitVec coords = tb->second.coords(img);
        m.set_row(r, std::move(coords));
      } else if (img.any()) {
        throw std::logic_error("induced_on_homology: nonzero image in vanishing homology");
      }
    }
    out[k] = std::move(m);
  }
  return out;
}

nlohmann::json ParityChainMap::to_json() const {
  nlohmann::json j;
  j["degree_shift"] = shift_;
  auto ids = [](const GradedBitComplex& c) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < c.generator_count(); ++i) a.push_back(c.generator(i).id);
    return a;
  };
  j["source_generators"] = ids(*src_);
  j["target_generators"] = ids(*tgt_);
  nlohmann::json blocks = nlohmann::json::object();
  if (!src_->empty())
    for (int k = src_->min_degree(); k <= src_->max_degree(); ++k)
      if (src_->generator_count(k) > 0 && tgt_->generator_count(k + shift_) > 0)
        blocks[std::to_string(k)] = block(k).to_bits();
  j["blocks"] = std::move(blocks);
  nlohmann::json prov = nlohmann::json::object();
  for (const auto& [key, events] : provenance_) prov[key] = events;
  j["provenance"] = std::move(prov);
  j["verified_chain_map"] = verified_;
  return j;
}

ParityChainMap ParityChainMap::from_json(const nlohmann::json& j,
                                         std::shared_ptr<const GradedBitComplex> source,
                                         std::shared_ptr<const GradedBitComplex> target) {
  ParityChainMap m(source, target, j.at("degree_shift").get<int>());
  for (const auto& [key, bits] : j.at("blocks").items()) {
    int k = std::stoi(key);
    m.set_block(k, BitMatrix::from_bits(source->generator_count(k),
                                        target->generator_count(k + m.degree_shift()),
                                        bits.get<std::string>()));
  }
  if (j.contains("provenance"))
    for (const auto& [key, events] : j.at("provenance").items())
      m.provenance_[key] = events.get<std::vector<std::string>>();
  m.mark_verified(j.value("verified_chain_map", false));
  return m;
}

ParityChainMap compose(const ParityChainMap& f, const ParityChainMap& g) {
  if (f.target_ptr() != g.source_ptr())
    throw std::invalid_argument("compose: target of first map must be source of second");
  ParityChainMap out(f.source_ptr(), g.target_ptr(), f.degree_shift() + g.degree_shift());
  const GradedBitComplex& s = f.source();
  if (!s.empty())
    for (int k = s.min_degree(); k <= s.max_degree(); ++k) {
      if (s.generator_count(k) == 0) continue;
      out.set_block(k, f.block(k).multiplied(g.block(k + f.degree_shift())));
    }
  return out;
}

ParityChainMap tensor_map(const ParityChainMap& f, const ParityChainMap& g,
                          std::shared_ptr<const GradedBitComplex> tensor_source,
                          std::shared_ptr<const GradedBitComplex> tensor_target) {
  ParityChainMap out(tensor_source, tensor_target,
                     f.degree_shift() + g.degree_shift());
  const GradedBitComplex& a = f.source();
  const GradedBitComplex& b = g.source();
  for (int ia = 0; ia < a.generator_count(); ++ia)
    for (int ib = 0; ib < b.generator_count(); ++ib) {
      const std::string src_id = a.generator(ia).id + "(x)" + b.generator(ib).id;
      int ka = a.generator(ia).degree;
      int kb = b.generator(ib).degree;
      const BitMatrix& fa = f.block(ka);
      const BitMatrix& gb = g.block(kb);
      int ra = a.position_in_degree(ia);
      int rb = b.position_in_degree(ib);
      const auto& fcols = f.target().degree_indices(ka + f.degree_shift());
      const auto& gcols = g.target().degree_indices(kb + g.degree_shift());
      for (int ca = 0; ca < static_cast<int>(fcols.size()); ++ca) {
        if (!fa.get(ra, ca)) continue;
        for (int cb = 0; cb < static_cast<int>(gcols.size()); ++cb) {
          if (!gb.get(rb, cb)) continue;
          const std::string tgt_id = f.target().generator(fcols[ca]).id + "(x)" +
                                     g.target().generator(gcols[cb]).id;
          out.set_entry(src_id, tgt_id, true);
        }
      }
    }
  return out;
}

}  // namespace loopmorse::gf2
