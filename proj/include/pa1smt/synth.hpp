#pragma once

#include "pa1smt/io.hpp"
#include "pa1smt/linalg.hpp"

#include <cstdint>
#include <vector>

// Synthetic multi-domain benchmark: Gaussian category blobs for a labeled
// source domain, and target domains that draw from a subset of the source
// categories before passing through their own rotation, translation and
// extra noise.
namespace pa1smt::synth {

enum class RotationKind { kAngle, kRandomOrthogonal };

struct DomainShift {
  RotationKind rotation = RotationKind::kAngle;
  // kAngle: every coordinate pair of a seeded random basis is rotated by
  // this many radians.
  double angle = 0.0;
  double translation = 0.0;  // length of a seeded random offset
  double noise = 0.0;        // std of extra isotropic noise
};

struct TargetSpec {
  std::vector<int> categories;  // subset of 0..source_categories-1
  DomainShift shift;
};

struct SyntheticSpec {
  Eigen::Index dim = 8;
  Eigen::Index source_categories = 6;
  double class_std = 1.0;
  // Pairwise distance between category means in units of class_std.
  double separation = 6.0;
  Eigen::Index source_samples_per_category = 40;
  Eigen::Index target_samples_per_category = 40;
  std::vector<TargetSpec> targets;
  std::uint64_t seed = 7;

  // Throws ConfigError for empty or out-of-range subsets, separation below
  // 6, or non-positive sizes.
  void validate() const;
};

struct SyntheticData {
  io::Dataset source;                       // labels 0..C_S-1
  std::vector<Matrix> targets;              // unlabeled samples
  std::vector<std::vector<int>> target_truth;  // source category ids
  Matrix means;                             // d x C_S category means
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// C_S = 6 source categories, 20 dimensions, means 8 class stds apart. Two
// targets hold five categories each and share four of them ({0,1,2,3,4} and
// {0,1,2,3,5}); with `targets == 3` a third target {1,2,3,4} is appended.
// Each target is rotated and shifted moderately. The dimension exceeds the
// default dictionary size so the shared dictionary is a real bottleneck.
SyntheticSpec default_transfer_spec(int targets = 2);

}  // namespace pa1smt::synth
