#include "grae/datasets.hpp"

#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "grae/error.hpp"

namespace grae {

Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    const std::size_t d = spec.latent_dim;
    if (d == 0 || spec.column_norms.size() != d) {
        throw Error(ErrorCode::ConfigError, "column_norms must have one entry per latent dimension");
    }
    if (spec.n == 0) throw Error(ErrorCode::ConfigError, "synthetic sample count must be positive");
    Rng rng(seed);
    Matrix w(d, d);
    fill_standard_normal(rng, w.data());
    if (spec.orthogonal_columns) {
        for (std::size_t c = 0; c < d; ++c) {
            Vector col = w.col(c);
            for (std::size_t p = 0; p < c; ++p) {
                const Vector prev = w.col(p);
                axpy(-dot(col, prev) / squared_norm(prev), prev, col);
            }
            for (std::size_t r = 0; r < d; ++r) w(r, c) = col[r];
        }
    }
    for (std::size_t c = 0; c < d; ++c) {
        const double scale = spec.column_norms[c] / norm(w.col(c));
        for (std::size_t r = 0; r < d; ++r) w(r, c) *= scale;
    }
    Matrix z(spec.n, d);
    fill_standard_normal(rng, z.data());
    Matrix x = matmul_nt(z, w);
    Vector noise = standard_normal(rng, x.rows() * x.cols());
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        x.data()[i] = activate(spec.nu, x.data()[i]) + spec.noise_std * noise[i];
    }
    Dataset ds;
    ds.x = std::move(x);
    ds.z_true = std::move(z);
    ds.w = std::move(w);
    ds.provenance = "synthetic nu=" + std::string(to_string(spec.nu)) + " seed=" + std::to_string(seed);
    return ds;
}

std::size_t IdxArray::item_size() const noexcept {
    std::size_t s = 1;
    for (std::size_t i = 1; i < dims.size(); ++i) s *= dims[i];
    return s;
}

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes) {
    auto read_u32 = [&](std::size_t pos) {
        return (std::uint32_t{bytes[pos]} << 24) | (std::uint32_t{bytes[pos + 1]} << 16) |
               (std::uint32_t{bytes[pos + 2]} << 8) | std::uint32_t{bytes[pos + 3]};
    };
    if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, "IDX header is incomplete");
    IdxArray arr;
    arr.magic = read_u32(0);
    if (arr.magic != kIdxImageMagic && arr.magic != kIdxLabelMagic) {
        throw Error(ErrorCode::BadMagic, "unsupported IDX magic " + std::to_string(arr.magic));
    }
    const std::size_t ndims = arr.magic & 0xffu;
    if (bytes.size() < 4 + 4 * ndims) throw Error(ErrorCode::TruncatedFile, "IDX dimension table is incomplete");
    std::size_t payload = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
        arr.dims.push_back(read_u32(4 + 4 * i));
        payload *= arr.dims.back();
    }
    const std::size_t start = 4 + 4 * ndims;
    if (bytes.size() - start < payload) {
        throw Error(ErrorCode::TruncatedFile, "IDX payload shorter than declared: " +
                                                  std::to_string(bytes.size() - start) + " < " +
                                                  std::to_string(payload));
    }
    arr.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                    bytes.begin() + static_cast<std::ptrdiff_t>(start + payload));
    return arr;
}

IdxArray load_idx(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_idx(bytes);
}

Vector pool_image(std::span<const std::uint8_t> image, std::size_t side) {
    constexpr std::size_t kSide = 28;
    if (image.size() != kSide * kSide) throw Error(ErrorCode::DimensionMismatch, "expected a 28x28 image");
    std::size_t crop = 0, pool = 0;
    switch (side) {
        case 28: pool = 1; break;
        case 14: pool = 2; break;
        case 8: crop = 2; pool = 3; break;
        default: throw Error(ErrorCode::ConfigError, "image side must be 8, 14 or 28");
    }
    Vector out(side * side);
    const double denom = 255.0 * static_cast<double>(pool * pool);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < pool; ++i)
                for (std::size_t j = 0; j < pool; ++j) s += image[(crop + r * pool + i) * kSide + crop + c * pool + j];
            out[r * side + c] = s / denom;
        }
    }
    return out;
}

Dataset preprocess(const IdxArray& images, std::size_t side, std::size_t m, std::uint64_t seed,
                   std::size_t offset) {
    if (images.magic != kIdxImageMagic || images.dims.size() != 3 || images.dims[1] != 28 || images.dims[2] != 28) {
        throw Error(ErrorCode::DimensionMismatch, "preprocess expects 28x28 IDX images");
    }
    const std::size_t total = images.count();
    const std::size_t take = offset < total ? std::min(m, total - offset) : 0;
    if (take == 0) throw Error(ErrorCode::EmptySelection, "no images selected");
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = total - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    const std::size_t item = images.item_size();
    Dataset ds;
    ds.x = Matrix(take, side * side);
    for (std::size_t k = 0; k < take; ++k) {
        const std::size_t idx = order[offset + k];
        const Vector px = pool_image(std::span(images.data).subspan(idx * item, item), side);
        std::copy(px.begin(), px.end(), ds.x.row(k).begin());
    }
    ds.provenance = "idx side=" + std::to_string(side) + " m=" + std::to_string(take) +
                    " offset=" + std::to_string(offset) + " seed=" + std::to_string(seed);
    return ds;
}

void write_dataset_csv(std::ostream& out, const Matrix& m) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << c;
    out << '\n';
    write_csv(out, m);
}

Matrix read_dataset_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw Error(ErrorCode::CorruptDocument, "missing CSV header");
    return read_csv(in);
}

}  // namespace grae
