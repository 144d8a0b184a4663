// Mode-specific normalization for tabular generators.
//
// Each continuous column carries a fitted 1-D Gaussian mixture. A value v is
// encoded as (alpha, mode one-hot): the mode is drawn from the posterior
// responsibilities (argmax when no Rng is supplied), alpha = (v - mu) / (4
// sigma) clipped to [-1, 1]. Discrete columns encode as plain one-hots.
// Decoding inverts: v = alpha * 4 sigma_k + mu_k with k the argmax of the
// indicator block (mode 0 when the block is all zero).
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "replayforge/common.hpp"
#include "replayforge/gmm.hpp"
#include "replayforge/matrix.hpp"
#include "replayforge/tabular.hpp"

namespace replayforge {

struct ModeNormalizer {
    Schema schema;
    // Parallel to schema.columns; empty entry for discrete columns.
    std::vector<std::vector<GaussianMode>> column_modes;
    std::size_t max_modes = 0;

    std::size_t retained_modes(std::size_t col) const {
        return column_modes[col].size();
    }

    // Sum over continuous columns of (1 + retained modes) plus one-hot widths.
    std::size_t encoded_width() const {
        std::size_t w = 0;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            if (schema.columns[c].kind == ColumnKind::Continuous)
                w += 1 + column_modes[c].size();
            else
                w += schema.columns[c].categories.size();
        }
        return w;
    }
};

constexpr std::size_t kDefaultMaxModes = 10;

// Fits a GMM per continuous column and freezes discrete category order.
// Column fits draw their seeds from `rng` in schema order.
inline ModeNormalizer fit_mode_normalizer(const TabularDataset& ds,
                                          std::size_t max_modes, Rng& rng,
                                          std::vector<GmmFitInfo>* fit_info = nullptr) {
    if (ds.n_rows() == 0)
        throw DomainError("fit_mode_normalizer: dataset is empty");
    if (max_modes < 1)
        throw DomainError("fit_mode_normalizer: max_modes must be >= 1");
    ModeNormalizer norm;
    norm.schema = ds.schema;
    norm.max_modes = max_modes;
    norm.column_modes.resize(ds.schema.columns.size());
    for (std::size_t c = 0; c < ds.schema.columns.size(); ++c) {
        if (ds.schema.columns[c].kind != ColumnKind::Continuous) continue;
        Rng col_rng(mix_seed(rng.next_u64(), "gmm-column", c));
        GmmFitInfo info;
        norm.column_modes[c] =
            fit_gmm_1d(ds.columns[c], max_modes, col_rng, &info);
        if (fit_info) fit_info->push_back(info);
    }
    return norm;
}

namespace detail {

inline double clip_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace detail

// Encodes one feature row. When `rng` is non-null the mode indicator is
// sampled from the responsibilities; otherwise the argmax mode is used.
inline std::vector<double> encode_row(const ModeNormalizer& norm,
                                      const std::vector<double>& row,
                                      Rng* rng = nullptr) {
    if (row.size() != norm.schema.columns.size())
        throw DimensionError("encode_row: row width mismatch");
    std::vector<double> out;
    out.reserve(norm.encoded_width());
    for (std::size_t c = 0; c < norm.schema.columns.size(); ++c) {
        const auto& col = norm.schema.columns[c];
        if (col.kind == ColumnKind::Continuous) {
            const auto& modes = norm.column_modes[c];
            std::size_t k = 0;
            if (modes.size() > 1) {
                auto resp = gmm_responsibilities(modes, row[c]);
                if (rng) {
                    k = rng->categorical(resp);
                } else {
                    for (std::size_t i = 1; i < resp.size(); ++i)
                        if (resp[i] > resp[k]) k = i;
                }
            }
            const double alpha = detail::clip_unit(
                (row[c] - modes[k].mean) / (4.0 * modes[k].stddev));
            out.push_back(alpha);
            for (std::size_t i = 0; i < modes.size(); ++i)
                out.push_back(i == k ? 1.0 : 0.0);
        } else {
            const auto idx = static_cast<std::size_t>(row[c]);
            if (idx >= col.categories.size())
                throw SchemaError("encode_row: category index out of range in '" +
                                  col.name + "'");
            for (std::size_t i = 0; i < col.categories.size(); ++i)
                out.push_back(i == idx ? 1.0 : 0.0);
        }
    }
    return out;
}

inline Matrix encode_dataset(const ModeNormalizer& norm, const TabularDataset& ds,
                             Rng* rng = nullptr) {
    Matrix out(ds.n_rows(), norm.encoded_width());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        const auto enc = encode_row(norm, ds.row(r), rng);
        std::copy(enc.begin(), enc.end(), out.row_ptr(r));
    }
    return out;
}

// Inverts encode_row. Mode choice is the argmax of the indicator block; an
// all-zero block falls back to mode 0. Alpha is clipped before inversion, so
// decoded continuous values stay within the mu +- 4 sigma envelope.
inline std::vector<double> decode_row(const ModeNormalizer& norm,
                                      const std::vector<double>& encoded) {
    if (encoded.size() != norm.encoded_width())
        throw DimensionError("decode_row: expected width " +
                             std::to_string(norm.encoded_width()) + ", got " +
                             std::to_string(encoded.size()));
    std::vector<double> row(norm.schema.columns.size());
    std::size_t pos = 0;
    for (std::size_t c = 0; c < norm.schema.columns.size(); ++c) {
        const auto& col = norm.schema.columns[c];
        if (col.kind == ColumnKind::Continuous) {
            const auto& modes = norm.column_modes[c];
            const double alpha = detail::clip_unit(encoded[pos]);
            std::size_t k = 0;
            for (std::size_t i = 1; i < modes.size(); ++i)
                if (encoded[pos + 1 + i] > encoded[pos + 1 + k]) k = i;
            row[c] = alpha * 4.0 * modes[k].stddev + modes[k].mean;
            pos += 1 + modes.size();
        } else {
            std::size_t k = 0;
            for (std::size_t i = 1; i < col.categories.size(); ++i)
                if (encoded[pos + i] > encoded[pos + k]) k = i;
            row[c] = static_cast<double>(k);
            pos += col.categories.size();
        }
    }
    return row;
}

}  // namespace replayforge
