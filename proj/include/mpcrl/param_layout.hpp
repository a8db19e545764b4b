#pragma once

#include <string>
#include <vector>

#include "mpcrl/common.hpp"

namespace mpcrl {

/// One named block of a flat parameter vector. Matrices are stored
/// column-major.
struct ParamBlock {
  std::string name;
  Index rows = 1;
  Index cols = 1;
  bool symmetric = false;
  Index offset = 0;

  Index size() const { return rows * cols; }
};

/// Square sub-block of a symmetric parameter matrix that must stay positive
/// definite.
struct PdConstraint {
  std::string block;
  Index start = 0;
  Index size = 0;
};

/// Ordered set of named parameter blocks mapping onto a flat vector.
class ParamLayout {
 public:
  ParamLayout& add(std::string name, Index rows, Index cols = 1, bool symmetric = false);

  Index size() const { return size_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(const std::string& name) const;
  bool contains(const std::string& name) const;

  /// Copy of a block as a rows x cols matrix.
  Matrix get(const Vector& flat, const std::string& name) const;
  void set(Vector& flat, const std::string& name, const Matrix& value) const;

  /// Column names for CSV headers, e.g. "H_l[1][0]" or "c_l"; no commas.
  std::vector<std::string> flat_names() const;

  /// Symmetrizes every symmetric block in place.
  void symmetrize(Vector& flat) const;

  bool operator==(const ParamLayout& other) const;

 private:
  std::vector<ParamBlock> blocks_;
  Index size_ = 0;
};

}  // namespace mpcrl
