#pragma once

// Synthetic 2D generator and IDX image ingestion.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "grae/network.hpp"
#include "grae/numerics.hpp"

namespace grae {

struct SyntheticSpec {
    std::size_t latent_dim = 2;
    ActivationKind nu = ActivationKind::tanh;
    double noise_std = 0.05;
    std::size_t n = 4000;
    std::vector<double> column_norms{2.0, 1.0};
    /// Gram-Schmidt the Gaussian draw before rescaling the columns.
    bool orthogonal_columns = false;
};

struct Dataset {
    Matrix x;                      ///< n x D
    std::optional<Matrix> z_true;  ///< n x d
    std::optional<Matrix> w;       ///< D x d generating matrix
    std::string provenance;

    std::size_t size() const noexcept { return x.rows(); }
    std::size_t dim() const noexcept { return x.cols(); }
};

/// x = nu(W z) + eps, z ~ N(0, I), eps ~ N(0, noise_std^2 I).
Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

struct IdxArray {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> data;

    std::size_t count() const noexcept { return dims.empty() ? 0 : dims[0]; }
    std::size_t item_size() const noexcept;
};

constexpr std::uint32_t kIdxImageMagic = 2051;
constexpr std::uint32_t kIdxLabelMagic = 2049;

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes);
IdxArray load_idx(const std::filesystem::path& path);

/// Average-pools one 28x28 image to side x side, scaled to [0, 1]. Side 8
/// crops the central 24x24 first.
Vector pool_image(std::span<const std::uint8_t> image, std::size_t side);

/// Seed-keyed shuffle, then images [offset, offset + m) pooled to side x side.
Dataset preprocess(const IdxArray& images, std::size_t side, std::size_t m, std::uint64_t seed,
                   std::size_t offset = 0);

/// CSV with a header row of column indices.
void write_dataset_csv(std::ostream& out, const Matrix& m);
Matrix read_dataset_csv(std::istream& in);

}  // namespace grae
