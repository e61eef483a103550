#pragma once
// Exact GF(2) linear algebra on packed machine words, graded chain complexes,
// and parity-valued chain maps.  Nothing in this header touches floating
// point; every identity checked here (d^2 = 0, chain-map squares, homology
// ranks) is exact arithmetic over the two-element field.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace loopmorse::gf2 {

// Dynamically sized bit vector packed into 64-bit words.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(int n) : n_(n), w_((n + 63) / 64, 0) {}
  static BitVec from_string(const std::string& bits);

  int size() const { return n_; }
  bool get(int i) const { return (w_[i >> 6] >> (i & 63)) & 1u; }
  void set(int i, bool v) {
    std::uint64_t m = std::uint64_t(1) << (i & 63);
    if (v) w_[i >> 6] |= m; else w_[i >> 6] &= ~m;
  }
  void flip(int i) { w_[i >> 6] ^= std::uint64_t(1) << (i & 63); }

  BitVec& operator^=(const BitVec& o);
  friend BitVec operator^(BitVec a, const BitVec& b) { a ^= b; return a; }
  bool operator==(const BitVec&) const = default;

  bool any() const;
  int count() const;
  int lowest_set() const;  // -1 when zero
  std::string to_string() const;

 private:
  int n_ = 0;
  std::vector<std::uint64_t> w_;
};

// Dense bit matrix, rows stored as BitVecs.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), r_(rows, BitVec(cols)) {}
  static BitMatrix identity(int n);
  static BitMatrix from_bits(int rows, int cols, const std::string& row_major);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool get(int i, int j) const { return r_[i].get(j); }
  void set(int i, int j, bool v) { r_[i].set(j, v); }
  void flip(int i, int j) { r_[i].flip(j); }
  const BitVec& row(int i) const { return r_[i]; }
  void set_row(int i, BitVec v);
  void xor_row(int i, const BitVec& v) { r_[i] ^= v; }

  bool operator==(const BitMatrix&) const = default;
  BitMatrix operator^(const BitMatrix& o) const;  // entrywise sum over GF(2)
  // Row-by-column product; composition of "row vector times matrix" maps.
  BitMatrix multiplied(const BitMatrix& o) const;
  BitMatrix transposed() const;

  bool is_zero() const;
  int rank() const;
  // Row-major concatenation of all rows, '0'/'1', length rows*cols.
  std::string to_bits() const;

  // Multiply a row vector from the left: (v * M), v.size() == rows().
  BitVec apply_from_left(const BitVec& v) const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<BitVec> r_;
};

// Incremental row-echelon basis with deterministic lowest-index pivots.
// Pivot choice depends only on the order in which vectors are inserted, so
// downstream bases are reproducible for a fixed generator ordering.
class Echelon {
 public:
  // Reduce v against the current basis; the returned residual is zero iff v
  // already lies in the span.
  BitVec reduce(BitVec v) const;
  // Insert v; returns true when v enlarged the span.
  bool insert(BitVec v);
  int dim() const { return static_cast<int>(rows_.size()); }

 private:
  std::vector<BitVec> rows_;
  std::vector<int> pivots_;
};

std::vector<BitVec> null_space_basis(const BitMatrix& m);  // {v : v*M = 0}

// Coordinates in a quotient space span(reps) + B / B.  Used to express cycles
// in a chosen homology basis.
class QuotientCoords {
 public:
  QuotientCoords() = default;
  QuotientCoords(const std::vector<BitVec>& subspace_span,
                 const std::vector<BitVec>& reps);
  // Coefficients of z over the representatives; throws when z is not in
  // span(reps) + subspace.
  BitVec coords(const BitVec& z) const;
  int rep_count() const { return reps_; }

 private:
  int reps_ = 0;
  std::vector<BitVec> rows_;
  std::vector<BitVec> tags_;
  std::vector<int> pivots_;
};

struct Generator {
  std::string id;
  int degree = 0;
  std::string label;
};

// Chain complex of GF(2) vector spaces graded by integer degree.  The
// boundary in degree k is a bit matrix whose rows are indexed by the
// degree-k generators and whose columns are indexed by the degree-(k-1)
// generators, both in insertion order.
class GradedBitComplex {
 public:
  int add_generator(Generator g);
  int generator_count() const { return static_cast<int>(gens_.size()); }
  int generator_count(int degree) const;
  const Generator& generator(int global_index) const { return gens_.at(global_index); }
  const std::vector<int>& degree_indices(int degree) const;
  // Position of a generator among the generators of its own degree.
  int position_in_degree(int global_index) const;
  std::optional<int> index_of(const std::string& id) const;
  bool empty() const { return gens_.empty(); }
  int min_degree() const;
  int max_degree() const;

  void set_boundary(int degree, BitMatrix m);
  const BitMatrix& boundary(int degree) const;  // zero matrix when unset
  void set_boundary_entry(const std::string& from_id, const std::string& to_id, bool v);

  bool verify_boundary_squared() const;
  // rank H_k = dim ker d_k - dim im d_{k+1}; throws when d^2 != 0.
  std::map<int, int> homology_ranks() const;

  nlohmann::json to_json() const;
  static GradedBitComplex from_json(const nlohmann::json& j);

 private:
  std::vector<Generator> gens_;
  std::map<std::string, int> by_id_;
  std::map<int, std::vector<int>> by_degree_;
  mutable std::map<int, BitMatrix> boundaries_;
  const std::vector<int>& degree_indices_or_empty(int degree) const;
};

// Tensor product complex.  Generators in each degree are ordered by
// (left global index, right global index); d(a (x) b) = da (x) b + a (x) db.
GradedBitComplex tensor_complex(const GradedBitComplex& a, const GradedBitComplex& b);
// Global index of a (x) b inside tensor_complex(A, B).
int tensor_index(const GradedBitComplex& a, const GradedBitComplex& b, int ia, int ib);

struct HomologyBasis {
  std::map<int, std::vector<BitVec>> reps;  // cycles in degree-local coordinates
  std::map<int, QuotientCoords> coords;
};

HomologyBasis homology_basis(const GradedBitComplex& c);

// Degree-preserving-up-to-shift map of complexes with GF(2) matrix blocks.
// Block k sends degree-k source generators (rows) to degree-(k+shift) target
// generators (columns).  Each nonzero entry can carry provenance: the ids of
// the counted intersection events that produced it.
class ParityChainMap {
 public:
  ParityChainMap() = default;
  ParityChainMap(std::shared_ptr<const GradedBitComplex> source,
                 std::shared_ptr<const GradedBitComplex> target,
                 int degree_shift);

  const GradedBitComplex& source() const { return *src_; }
  const GradedBitComplex& target() const { return *tgt_; }
  std::shared_ptr<const GradedBitComplex> source_ptr() const { return src_; }
  std::shared_ptr<const GradedBitComplex> target_ptr() const { return tgt_; }
  int degree_shift() const { return shift_; }

  void set_block(int degree, BitMatrix m);
  const BitMatrix& block(int degree) const;  // zero matrix when unset
  void set_entry(const std::string& src_id, const std::string& tgt_id, bool v);
  void add_provenance(const std::string& src_id, const std::string& tgt_id,
                      const std::string& event_id);
  const std::vector<std::string>& provenance(const std::string& src_id,
                                             const std::string& tgt_id) const;

  // Exact check of d_tgt o m = m o d_src across all degrees.
  bool is_chain_map() const;
  bool verified_chain_map() const { return verified_; }
  void mark_verified(bool v) { verified_ = v; }

  // Sum (XOR) of two maps with identical complexes and shift.
  ParityChainMap operator^(const ParityChainMap& o) const;

  // Matrices of the induced map on homology in the supplied bases; throws
  // when the chain-map identity fails.
  std::map<int, BitMatrix> induced_on_homology(const HomologyBasis& src_basis,
                                               const HomologyBasis& tgt_basis) const;

  nlohmann::json to_json() const;
  static ParityChainMap from_json(const nlohmann::json& j,
                                  std::shared_ptr<const GradedBitComplex> source,
                                  std::shared_ptr<const GradedBitComplex> target);

  mutable std::map<std::string, std::vector<std::string>> provenance_;

 private:
  std::shared_ptr<const GradedBitComplex> src_, tgt_;
  int shift_ = 0;
  mutable std::map<int, BitMatrix> blocks_;
  bool verified_ = false;
};

// g after f (apply f first); degree shifts add.
ParityChainMap compose(const ParityChainMap& f, const ParityChainMap& g);
// f (x) g on the tensor complexes of the respective sources and targets.
ParityChainMap tensor_map(const ParityChainMap& f, const ParityChainMap& g,
                          std::shared_ptr<const GradedBitComplex> tensor_source,
                          std::shared_ptr<const GradedBitComplex> tensor_target);

}  // namespace loopmorse::gf2
