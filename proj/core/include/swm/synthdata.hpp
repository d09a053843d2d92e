#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "swm/dataset.hpp"
#include "swm/geometry.hpp"

namespace swm {

/// Parameters of the synthetic superficial-white-matter atlas.
struct SyntheticAtlasSpec {
    std::uint32_t clusters = 8;           // K
    std::size_t per_cluster = 600;        // plausible + outlier streamlines of one cluster
    double outlier_fraction = 1.0 / 6.0;  // share of per_cluster labelled as the cluster's outlier class
    std::size_t dwm = 4000;
    double sigma = 1.5;                   // mm, plausible perturbation
    double outlier_sigma = 7.5;           // mm, outlier perturbation
    double min_length = 40.0;             // mm
    bool bilateral = true;                // each cluster appears in both hemispheres
    std::uint64_t seed = 1;

    std::size_t outliers_per_cluster() const;
    std::size_t plausible_per_cluster() const { return per_cluster - outliers_per_cluster(); }

    /// Throws std::invalid_argument on an invalid spec, including one that
    /// leaves a cluster without plausible streamlines.
    void validate() const;
};

struct SyntheticAtlas {
    LabeledDataset d1;  // kDwmLabel / kSwmLabel; outliers count as SWM
    LabeledDataset d2;  // cluster c -> c, its outliers -> K + c
    std::vector<Streamline> prototypes;      // K, left hemisphere
    std::vector<std::uint64_t> checksums;    // FNV-1a of each prototype's coordinates
};

/// Ground truth of a generated subject: cluster id, or -1 for DWM and outliers.
struct SyntheticSubject {
    std::vector<Streamline> streamlines;
    std::vector<std::int32_t> truth;
};

/// Deterministic in spec (including the seed). D1 holds the D2 streamlines
/// in the same order followed by the DWM streamlines.
SyntheticAtlas generate_atlas(const SyntheticAtlasSpec& spec);

/// New streamlines drawn around existing prototypes with the counts of
/// `spec` and its seed, shuffled. Stands in for an unseen subject.
SyntheticSubject generate_subject(std::span<const Streamline> prototypes, const SyntheticAtlasSpec& spec);

/// Fold id in [0, folds) for each of `size` items; sizes differ by at most 1.
/// Throws std::invalid_argument when folds < 2 or folds > size.
std::vector<std::uint32_t> kfold_split(std::size_t size, std::uint32_t folds, std::uint64_t seed);

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::uint64_t checksum(const Streamline& s);

}  // namespace swm
