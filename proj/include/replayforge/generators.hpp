// Generative models used for replay: a plain VAE and a tabular VAE.
//
// Both share the encoder/decoder scheme: the encoder maps an encoded row to
// (mu, logvar), z = mu + sigma * eps, the decoder reconstructs the encoding.
// Loss = reconstruction + KL(q(z|x) || N(0, I)).
//
//   VAE   encoding: z-scored continuous values + discrete one-hots,
//         reconstruction = mean squared error over the encoded vector.
//   TVAE  encoding: mode-specific normalization (alpha, mode one-hot) per
//         continuous column + discrete one-hots, reconstruction = Gaussian
//         NLL on alpha (fixed sigma_dec = 0.1) + cross-entropy on each mode
//         indicator and discrete block.
//
// The TVAE lays its encoding out at fixed capacity (max_modes slots per
// continuous column, unused slots masked), so network shapes and serialized
// size do not change when a refitted normalizer retains a different number
// of modes.
#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "replayforge/common.hpp"
#include "replayforge/matrix.hpp"
#include "replayforge/nn.hpp"
#include "replayforge/normalizer.hpp"
#include "replayforge/serialize.hpp"
#include "replayforge/tabular.hpp"

namespace replayforge {

enum class GeneratorKind { VAE, TVAE };

struct GeneratorConfig {
    GeneratorKind kind = GeneratorKind::TVAE;
    std::size_t latent_dim = 32;
    std::vector<std::size_t> hidden_sizes = {128, 128};
    std::size_t epochs = 300;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    std::size_t max_modes = kDefaultMaxModes;
    bool warm_start = false;
};

struct ElboBreakdown {
    double loss = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
};

struct ElboGrads {
    std::vector<DenseGrads> encoder;
    std::vector<DenseGrads> decoder;
};

namespace detail {

constexpr double kTvaeDecoderSigma = 0.1;

// One encoded block per feature column. Continuous blocks occupy
// 1 + capacity slots (alpha then mode indicators); discrete blocks occupy
// capacity (= category count) slots.
struct EncodedBlock {
    std::size_t column = 0;
    std::size_t offset = 0;
    std::size_t capacity = 0;
    bool continuous = false;
};

inline std::vector<EncodedBlock> make_layout(const Schema& schema,
                                             GeneratorKind kind,
                                             std::size_t max_modes,
                                             std::size_t* width_out) {
    std::vector<EncodedBlock> blocks;
    std::size_t off = 0;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        EncodedBlock b;
        b.column = c;
        b.offset = off;
        if (schema.columns[c].kind == ColumnKind::Continuous) {
            b.continuous = true;
            b.capacity = kind == GeneratorKind::TVAE ? max_modes : 0;
            off += 1 + b.capacity;
        } else {
            b.continuous = false;
            b.capacity = schema.columns[c].categories.size();
            off += b.capacity;
        }
        blocks.push_back(b);
    }
    *width_out = off;
    return blocks;
}

}  // namespace detail

struct Generator {
    GeneratorConfig config;
    Schema schema;
    Mlp encoder;
    Mlp decoder;
    ModeNormalizer normalizer;        // TVAE only
    std::vector<double> feature_mean;  // VAE only, continuous columns
    std::vector<double> feature_std;   // VAE only
    bool trained = false;

    std::vector<detail::EncodedBlock> layout;
    std::size_t encoded_width = 0;

    Generator() = default;
    Generator(GeneratorConfig cfg, Schema s, Rng& rng)
        : config(std::move(cfg)), schema(std::move(s)) {
        schema.validate();
        layout = detail::make_layout(schema, config.kind, config.max_modes,
                                     &encoded_width);
        init_networks(rng);
    }

    void init_networks(Rng& rng) {
        encoder = make_mlp(encoded_width, config.hidden_sizes,
                           2 * config.latent_dim, Activation::ReLU,
                           Activation::Identity, rng);
        decoder = make_mlp(config.latent_dim, config.hidden_sizes, encoded_width,
                           Activation::ReLU, Activation::Identity, rng);
    }

    std::size_t retained(std::size_t col) const {
        return config.kind == GeneratorKind::TVAE
                   ? normalizer.retained_modes(col)
                   : 0;
    }

    // ---- encoding ------------------------------------------------------------

    // Fits the per-kind feature statistics on `ds` (TVAE: mode normalizer,
    // VAE: z-score stats).
    void fit_stats(const TabularDataset& ds, Rng& rng) {
        if (config.kind == GeneratorKind::TVAE) {
            normalizer = fit_mode_normalizer(ds, config.max_modes, rng);
        } else {
            feature_mean.assign(schema.columns.size(), 0.0);
            feature_std.assign(schema.columns.size(), 1.0);
            const double n = static_cast<double>(ds.n_rows());
            for (std::size_t c = 0; c < schema.columns.size(); ++c) {
                if (schema.columns[c].kind != ColumnKind::Continuous) continue;
                double m = 0.0;
                for (double v : ds.columns[c]) m += v;
                m /= n;
                double s2 = 0.0;
                for (double v : ds.columns[c]) s2 += (v - m) * (v - m);
                feature_mean[c] = m;
                feature_std[c] = std::max(std::sqrt(s2 / n), 1e-8);
            }
        }
    }

    // Encodes a dataset into the fixed-capacity layout. TVAE mode indicators
    // are sampled from responsibilities via `rng` (argmax when null).
    Matrix encode(const TabularDataset& ds, Rng* rng) const {
        Matrix out(ds.n_rows(), encoded_width);
        std::vector<double> row(schema.columns.size());
        for (std::size_t r = 0; r < ds.n_rows(); ++r) {
            for (std::size_t c = 0; c < schema.columns.size(); ++c)
                row[c] = ds.columns[c][r];
            double* dst = out.row_ptr(r);
            for (const auto& blk : layout) {
                const double v = row[blk.column];
                if (blk.continuous) {
                    if (config.kind == GeneratorKind::TVAE) {
                        const auto& modes = normalizer.column_modes[blk.column];
                        std::size_t k = 0;
                        if (modes.size() > 1) {
                            auto resp = gmm_responsibilities(modes, v);
                            if (rng) {
                                k = rng->categorical(resp);
                            } else {
                                for (std::size_t i = 1; i < resp.size(); ++i)
                                    if (resp[i] > resp[k]) k = i;
                            }
                        }
                        dst[blk.offset] =
                            detail::clip_unit((v - modes[k].mean) /
                                              (4.0 * modes[k].stddev));
                        dst[blk.offset + 1 + k] = 1.0;
                    } else {
                        dst[blk.offset] = (v - feature_mean[blk.column]) /
                                          feature_std[blk.column];
                    }
                } else {
                    dst[blk.offset + static_cast<std::size_t>(v)] = 1.0;
                }
            }
        }
        return out;
    }

    // Maps decoder outputs back to schema-conformant rows.
    TabularDataset decode(const Matrix& decoded) const {
        TabularDataset out(schema);
        for (std::size_t r = 0; r < decoded.rows; ++r) {
            const double* src = decoded.row_ptr(r);
            std::vector<double> row(schema.columns.size());
            for (const auto& blk : layout) {
                if (blk.continuous) {
                    if (config.kind == GeneratorKind::TVAE) {
                        const auto& modes = normalizer.column_modes[blk.column];
                        const double alpha = detail::clip_unit(src[blk.offset]);
                        std::size_t k = 0;
                        for (std::size_t i = 1; i < modes.size(); ++i)
                            if (src[blk.offset + 1 + i] > src[blk.offset + 1 + k])
                                k = i;
                        row[blk.column] =
                            alpha * 4.0 * modes[k].stddev + modes[k].mean;
                    } else {
                        row[blk.column] = src[blk.offset] * feature_std[blk.column] +
                                          feature_mean[blk.column];
                    }
                } else {
                    std::size_t k = 0;
                    for (std::size_t i = 1; i < blk.capacity; ++i)
                        if (src[blk.offset + i] > src[blk.offset + k]) k = i;
                    row[blk.column] = static_cast<double>(k);
                }
            }
            out.append_row(row);
        }
        return out;
    }

    // ---- ELBO ----------------------------------------------------------------

    // Loss and exact gradients for one encoded batch with given latent noise.
    // eps must be batch x latent_dim. Gradients go to *grads when non-null.
    ElboBreakdown elbo(const Matrix& batch, const Matrix& eps,
                       ElboGrads* grads) const {
        if (batch.rows == 0) throw DomainError("elbo: empty batch");
        if (batch.cols != encoded_width)
            throw DimensionError("elbo: encoded width mismatch");
        require_shape(eps, batch.rows, config.latent_dim, "elbo eps");
        const std::size_t bsz = batch.rows;
        const std::size_t latent = config.latent_dim;
        const double invb = 1.0 / static_cast<double>(bsz);

        MlpTrace enc_trace = encoder.forward_trace(batch);
        const Matrix& h = enc_trace.output;  // bsz x 2*latent: [mu | logvar]

        Matrix z(bsz, latent);
        double kl = 0.0;
        for (std::size_t i = 0; i < bsz; ++i) {
            const double* hrow = h.row_ptr(i);
            double* zrow = z.row_ptr(i);
            const double* erow = eps.row_ptr(i);
            for (std::size_t l = 0; l < latent; ++l) {
                const double mu = hrow[l];
                const double logvar = hrow[latent + l];
                const double sigma = std::exp(0.5 * logvar);
                zrow[l] = mu + sigma * erow[l];
                kl += 0.5 * (mu * mu + std::exp(logvar) - 1.0 - logvar);
            }
        }
        kl *= invb;

        MlpTrace dec_trace = decoder.forward_trace(z);
        const Matrix& xhat = dec_trace.output;

        Matrix dxhat(bsz, encoded_width);
        const double recon = reconstruction_term(batch, xhat, invb, &dxhat);

        ElboBreakdown out;
        out.reconstruction = recon;
        out.kl = kl;
        out.loss = recon + kl;
        if (!std::isfinite(out.loss))
            throw TrainingError("elbo: non-finite loss");
        if (!grads) return out;

        Matrix dz = decoder.backward(dec_trace, dxhat, grads->decoder);

        Matrix dh(bsz, 2 * latent);
        for (std::size_t i = 0; i < bsz; ++i) {
            const double* hrow = h.row_ptr(i);
            const double* dzrow = dz.row_ptr(i);
            const double* erow = eps.row_ptr(i);
            double* dhrow = dh.row_ptr(i);
            for (std::size_t l = 0; l < latent; ++l) {
                const double mu = hrow[l];
                const double logvar = hrow[latent + l];
                const double sigma = std::exp(0.5 * logvar);
                dhrow[l] = dzrow[l] + mu * invb;                      // d/d mu
                dhrow[latent + l] = dzrow[l] * erow[l] * sigma * 0.5  // d/d logvar
                                    + 0.5 * (std::exp(logvar) - 1.0) * invb;
            }
        }
        encoder.backward(enc_trace, dh, grads->encoder);
        return out;
    }

    // ---- training ------------------------------------------------------------

    void fit(const TabularDataset& ds, Rng& rng) {
        if (ds.n_rows() == 0) throw DomainError("Generator::fit: empty dataset");
        if (!(ds.schema == schema))
            throw SchemaError("Generator::fit: dataset schema mismatch");

        Rng stats_rng(mix_seed(rng.next_u64(), "gen-stats"));
        fit_stats(ds, stats_rng);
        Rng enc_rng(mix_seed(rng.next_u64(), "gen-encode"));
        Matrix x = encode(ds, &enc_rng);

        if (!(config.warm_start && trained)) {
            Rng init_rng(mix_seed(rng.next_u64(), "gen-init"));
            init_networks(init_rng);
        }

        AdamState opt;
        opt.learning_rate = config.learning_rate;
        ElboGrads grads;
        grads.encoder.resize(encoder.layers.size());
        grads.decoder.resize(decoder.layers.size());
        std::deque<std::string> names;
        // Blocks reference the grads storage; allocate it once via a dry run.
        {
            Matrix probe = take_rows(x, {0});
            Matrix eps0(1, config.latent_dim);
            elbo(probe, eps0, &grads);
        }
        auto blocks = mlp_param_blocks(encoder, grads.encoder, names, "encoder");
        auto dec_blocks = mlp_param_blocks(decoder, grads.decoder, names, "decoder");
        blocks.insert(blocks.end(), dec_blocks.begin(), dec_blocks.end());

        const std::size_t n = x.rows;
        const std::size_t bsz = std::min(config.batch_size, n);
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            auto perm = rng.permutation(n);
            for (std::size_t start = 0; start < n; start += bsz) {
                const std::size_t end = std::min(start + bsz, n);
                std::vector<std::size_t> idx(perm.begin() + start,
                                             perm.begin() + end);
                Matrix xb = take_rows(x, idx);
                Matrix eps(idx.size(), config.latent_dim);
                for (double& e : eps.data) e = rng.normal();
                elbo(xb, eps, &grads);
                adam_step(opt, blocks);
            }
        }
        trained = true;
    }

    // ---- sampling ------------------------------------------------------------

    TabularDataset sample(std::size_t n, Rng& rng) const {
        if (!trained) throw StateError("Generator::sample: generator not trained");
        if (n < 1) throw DomainError("Generator::sample: n must be >= 1");
        Matrix z(n, config.latent_dim);
        for (double& v : z.data) v = rng.normal();
        return decode(decoder.forward(z));
    }

    // ---- serialization ---------------------------------------------------------

    // Fixed-size dump: capacity-padded normalizer slots keep the byte size
    // independent of how many modes a refit retained.
    std::string serialize() const {
        BinaryWriter w;
        w.str("RFGEN1");
        w.u8(config.kind == GeneratorKind::TVAE ? 1 : 0);
        w.u64(config.latent_dim);
        w.u64(config.hidden_sizes.size());
        for (auto hsz : config.hidden_sizes) w.u64(hsz);
        w.u64(config.epochs);
        w.u64(config.batch_size);
        w.f64(config.learning_rate);
        w.u64(config.max_modes);
        w.u8(config.warm_start ? 1 : 0);
        w.u8(trained ? 1 : 0);
        write_mlp(w, encoder);
        write_mlp(w, decoder);
        if (config.kind == GeneratorKind::TVAE) {
            const std::vector<GaussianMode> no_modes;
            const bool fitted = !normalizer.column_modes.empty();
            for (std::size_t c = 0; c < schema.columns.size(); ++c) {
                if (schema.columns[c].kind != ColumnKind::Continuous) continue;
                const auto& modes = fitted ? normalizer.column_modes[c] : no_modes;
                w.u64(modes.size());
                for (std::size_t k = 0; k < config.max_modes; ++k) {
                    const bool live = k < modes.size();
                    w.f64(live ? modes[k].weight : 0.0);
                    w.f64(live ? modes[k].mean : 0.0);
                    w.f64(live ? modes[k].stddev : 0.0);
                }
            }
        } else {
            w.f64s(feature_mean);
            w.f64s(feature_std);
        }
        return w.bytes();
    }

    static Generator deserialize(const std::string& bytes, const Schema& schema) {
        BinaryReader r(bytes);
        if (r.str() != "RFGEN1") throw ParseError("not a generator checkpoint");
        GeneratorConfig cfg;
        cfg.kind = r.u8() ? GeneratorKind::TVAE : GeneratorKind::VAE;
        cfg.latent_dim = r.u64();
        cfg.hidden_sizes.resize(r.u64());
        for (auto& hsz : cfg.hidden_sizes) hsz = r.u64();
        cfg.epochs = r.u64();
        cfg.batch_size = r.u64();
        cfg.learning_rate = r.f64();
        cfg.max_modes = r.u64();
        cfg.warm_start = r.u8() != 0;
        Rng dummy(0);
        Generator g(cfg, schema, dummy);
        g.trained = r.u8() != 0;
        read_mlp(r, g.encoder);
        read_mlp(r, g.decoder);
        if (cfg.kind == GeneratorKind::TVAE) {
            g.normalizer.schema = schema;
            g.normalizer.max_modes = cfg.max_modes;
            g.normalizer.column_modes.assign(schema.columns.size(), {});
            for (std::size_t c = 0; c < schema.columns.size(); ++c) {
                if (schema.columns[c].kind != ColumnKind::Continuous) continue;
                const std::uint64_t kept = r.u64();
                std::vector<GaussianMode> modes;
                for (std::size_t k = 0; k < cfg.max_modes; ++k) {
                    GaussianMode m;
                    m.weight = r.f64();
                    m.mean = r.f64();
                    m.stddev = r.f64();
                    if (k < kept) modes.push_back(m);
                }
                g.normalizer.column_modes[c] = std::move(modes);
            }
        } else {
            g.feature_mean = r.f64s();
            g.feature_std = r.f64s();
        }
        return g;
    }

    std::size_t serialized_bytes() const { return serialize().size(); }

private:
    double reconstruction_term(const Matrix& x, const Matrix& xhat, double invb,
                               Matrix* dxhat) const {
        const std::size_t bsz = x.rows;
        double recon = 0.0;
        if (config.kind == GeneratorKind::VAE) {
            // Mean squared error over the full encoded vector.
            const double scale = invb / static_cast<double>(encoded_width);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double d = xhat.data[i] - x.data[i];
                recon += d * d * scale;
                dxhat->data[i] = 2.0 * d * scale;
            }
            return recon;
        }
        // TVAE: Gaussian NLL on alpha slots, masked cross-entropy on mode
        // indicator blocks, cross-entropy on discrete blocks.
        const double sd = detail::kTvaeDecoderSigma;
        const double nll_const =
            std::log(sd) + 0.5 * std::log(2.0 * 3.14159265358979323846);
        std::vector<double> p;
        for (std::size_t i = 0; i < bsz; ++i) {
            const double* xr = x.row_ptr(i);
            const double* hr = xhat.row_ptr(i);
            double* dr = dxhat->row_ptr(i);
            for (const auto& blk : layout) {
                if (blk.continuous) {
                    const double d = hr[blk.offset] - xr[blk.offset];
                    recon += (d * d / (2.0 * sd * sd) + nll_const) * invb;
                    dr[blk.offset] = d / (sd * sd) * invb;
                    const std::size_t live = retained(blk.column);
                    if (live > 1) {
                        recon += softmax_ce(hr + blk.offset + 1, xr + blk.offset + 1,
                                            live, invb, dr + blk.offset + 1, p);
                    }
                    // live == 1: a single-slot softmax is identically 1, so the
                    // indicator contributes neither loss nor gradient.
                } else {
                    recon += softmax_ce(hr + blk.offset, xr + blk.offset,
                                        blk.capacity, invb, dr + blk.offset, p);
                }
            }
        }
        return recon;
    }

    // Cross-entropy of softmax(logits) against a one-hot target; returns the
    // loss contribution and accumulates d loss / d logits.
    static double softmax_ce(const double* logits, const double* onehot,
                             std::size_t n, double invb, double* dlogits,
                             std::vector<double>& scratch) {
        scratch.resize(n);
        double mx = logits[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            scratch[j] = std::exp(logits[j] - mx);
            sum += scratch[j];
        }
        double loss = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double pj = scratch[j] / sum;
            dlogits[j] = (pj - onehot[j]) * invb;
            if (onehot[j] > 0.5) loss += -std::log(std::max(pj, 1e-300)) * invb;
        }
        return loss;
    }

    static void write_mlp(BinaryWriter& w, const Mlp& net) {
        w.u64(net.layers.size());
        for (const auto& layer : net.layers) {
            w.u64(layer.weights.rows);
            w.u64(layer.weights.cols);
            w.u8(static_cast<std::uint8_t>(layer.activation));
            w.f64s(layer.weights.data);
            w.f64s(layer.bias);
        }
    }

    static void read_mlp(BinaryReader& r, Mlp& net) {
        net.layers.resize(r.u64());
        for (auto& layer : net.layers) {
            const std::size_t rows = r.u64();
            const std::size_t cols = r.u64();
            layer.activation = static_cast<Activation>(r.u8());
            layer.weights = Matrix(rows, cols);
            layer.weights.data = r.f64s();
            if (layer.weights.data.size() != rows * cols)
                throw ParseError("corrupt layer weights");
            layer.bias = r.f64s();
        }
    }
};

}  // namespace replayforge
