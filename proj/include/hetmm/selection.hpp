#pragma once

#include "hetmm/template_bank.hpp"
#include "hetmm/types.hpp"

#include <vector>

namespace hetmm {

enum class PrototypeKind { kEasy, kGlobal, kHard };

const char* to_string(PrototypeKind kind);

struct Prototype {
  Index source = 0;  // row of the original per-pixel set
  PrototypeKind kind = PrototypeKind::kEasy;
  friend bool operator==(const Prototype&, const Prototype&) = default;
};

/// Selected prototypes for one pixel, in selection order. Vectors are never
/// averaged: each entry names a member of the original set.
struct PixelPrototypeSet {
  std::vector<Prototype> prototypes;

  std::vector<Index> sources() const;
  Index size() const { return static_cast<Index>(prototypes.size()); }
};

/// Member of `members` maximising summed cosine similarity to all members.
/// `similarity` is the full N x N cosine-similarity matrix. Ties go to the
/// lowest index.
Index region_centre(const Eigen::MatrixXd& similarity, const std::vector<Index>& members);

/// region_centre over every row.
Index global_centre(const Eigen::MatrixXd& similarity);

/// Unselected row maximising the summed cosine distance to the selected
/// rows; lowest index on ties. Throws SelectionExhaustedError when every row
/// is already selected.
Index select_hard(const Eigen::MatrixXd& similarity, const std::vector<Index>& selected);

/// Cosine-similarity matrix of the rows; zero rows have similarity 0 to
/// everything, themselves included.
Eigen::MatrixXd cosine_similarity_matrix(const Eigen::MatrixXd& vectors);

/// Density-seeded initialisation followed by greedy hard-prototype growth up
/// to min(K, N) members. When OPTICS yields more than K regions the centres
/// of the K largest are kept (first-seen wins size ties), in region order.
PixelPrototypeSet select_pixel_prototypes(const Eigen::MatrixXd& vectors, const PtsConfig& cfg);

/// Compresses every pixel of every layer to K prototypes. Sheet k of the
/// result holds each pixel's k-th selected prototype.
TemplateBank pts_compress(const TemplateBank& bank, const PtsConfig& cfg);

}  // namespace hetmm
