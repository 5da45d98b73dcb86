#pragma once

// The LSTM autoencoder.
//
// encoder L1 (F -> hidden1) -> dropout -> encoder L2 (hidden1 -> hidden2)
//   -> bottleneck z = Wb h_T + bb (hidden2 -> bottleneck)
//   -> dual attention over (z, H, window) -> context
//   -> decoder L1 (F -> hidden2), h0 = W_init [z; context] + b_init
//   -> decoder L2 (hidden2 -> hidden1) -> output projection (hidden1 -> F)
//
// The decoder is unrolled autoregressively: step t consumes the previous
// step's projected output, the first step consumes a zero vector. Backward
// is hand-derived BPTT through the whole graph, including the autoregressive
// feedback and both attention branches; tests check every tensor against
// central finite differences.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnae/attention.hpp"
#include "attnae/errors.hpp"
#include "attnae/matrix.hpp"
#include "attnae/ops.hpp"
#include "attnae/rng.hpp"
#include "attnae/textio.hpp"

namespace attnae {

struct Hyperparams {
    double lr = 0.006;
    std::size_t batch = 32;
    std::size_t window = 20;
    std::size_t hidden1 = 64;
    std::size_t hidden2 = 32;
    std::size_t bottleneck = 64;
    double dropout = 0.06;
    std::size_t epochs = 30;
    std::uint64_t seed = 42;
    // attention widths and training guards (defaults from pilot sizing)
    std::size_t d_attn = 32;
    std::size_t d_embed = 8;
    std::size_t d_ctx = 32;
    std::size_t patience = 5;
    double grad_clip = 5.0;
};

inline nlohmann::json hyperparams_to_json(const Hyperparams& h) {
    return nlohmann::json{{"lr", h.lr},
                          {"batch", h.batch},
                          {"window", h.window},
                          {"hidden1", h.hidden1},
                          {"hidden2", h.hidden2},
                          {"bottleneck", h.bottleneck},
                          {"dropout", h.dropout},
                          {"epochs", h.epochs},
                          {"seed", h.seed},
                          {"d_attn", h.d_attn},
                          {"d_embed", h.d_embed},
                          {"d_ctx", h.d_ctx},
                          {"patience", h.patience},
                          {"grad_clip", h.grad_clip}};
}

inline Hyperparams hyperparams_from_json(const nlohmann::json& j) {
    Hyperparams h;
    h.lr = j.value("lr", h.lr);
    h.batch = j.value("batch", h.batch);
    h.window = j.value("window", h.window);
    h.hidden1 = j.value("hidden1", h.hidden1);
    h.hidden2 = j.value("hidden2", h.hidden2);
    h.bottleneck = j.value("bottleneck", h.bottleneck);
    h.dropout = j.value("dropout", h.dropout);
    h.epochs = j.value("epochs", h.epochs);
    h.seed = j.value("seed", h.seed);
    h.d_attn = j.value("d_attn", h.d_attn);
    h.d_embed = j.value("d_embed", h.d_embed);
    h.d_ctx = j.value("d_ctx", h.d_ctx);
    h.patience = j.value("patience", h.patience);
    h.grad_clip = j.value("grad_clip", h.grad_clip);
    return h;
}

struct LstmLayerParams {
    Matrix Wi, Wf, Wg, Wo;  // hidden x input
    Matrix Ui, Uf, Ug, Uo;  // hidden x hidden
    Matrix bi, bf, bg, bo;  // hidden x 1

    std::size_t hidden() const { return Wi.rows(); }
    std::size_t input() const { return Wi.cols(); }

    static LstmLayerParams zeros(std::size_t input, std::size_t hidden) {
        LstmLayerParams p;
        p.Wi = p.Wf = p.Wg = p.Wo = Matrix(hidden, input);
        p.Ui = p.Uf = p.Ug = p.Uo = Matrix(hidden, hidden);
        p.bi = p.bf = p.bg = p.bo = Matrix(hidden, 1);
        return p;
    }
};

inline void init_uniform(Matrix& m, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (double& v : m.raw()) v = rng.uniform(-bound, bound);
}

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases except the
// forget gate at +1.
inline LstmLayerParams init_lstm(std::size_t input, std::size_t hidden, Rng& rng) {
    LstmLayerParams p = LstmLayerParams::zeros(input, hidden);
    init_uniform(p.Wi, rng);
    init_uniform(p.Wf, rng);
    init_uniform(p.Wg, rng);
    init_uniform(p.Wo, rng);
    init_uniform(p.Ui, rng);
    init_uniform(p.Uf, rng);
    init_uniform(p.Ug, rng);
    init_uniform(p.Uo, rng);
    p.bf.fill(1.0);
    return p;
}

struct ModelShape {
    std::size_t features = 6;
    std::size_t window = 20;
    std::size_t hidden1 = 64;
    std::size_t hidden2 = 32;
    std::size_t bottleneck = 64;
    std::size_t d_attn = 32;
    std::size_t d_embed = 8;
    std::size_t d_ctx = 32;

    static ModelShape from_hyperparams(const Hyperparams& h, std::size_t features) {
        ModelShape s;
        s.features = features;
        s.window = h.window;
        s.hidden1 = h.hidden1;
        s.hidden2 = h.hidden2;
        s.bottleneck = h.bottleneck;
        s.d_attn = h.d_attn;
        s.d_embed = h.d_embed;
        s.d_ctx = h.d_ctx;
        return s;
    }
};

struct ModelParams {
    ModelShape shape;
    double dropout_rate = 0.06;

    LstmLayerParams enc1, enc2;
    Matrix Wb, bb;  // bottleneck projection
    AttentionParams attn;
    Matrix W_init, b_init;  // decoder L1 initial hidden state from [z; context]
    LstmLayerParams dec1, dec2;
    Matrix W_out, b_out;  // per-step output projection

    static ModelParams zeros(const ModelShape& s, double dropout_rate) {
        ModelParams p;
        p.shape = s;
        p.dropout_rate = dropout_rate;
        p.enc1 = LstmLayerParams::zeros(s.features, s.hidden1);
        p.enc2 = LstmLayerParams::zeros(s.hidden1, s.hidden2);
        p.Wb = Matrix(s.bottleneck, s.hidden2);
        p.bb = Matrix(s.bottleneck, 1);
        p.attn.Wq_f = Matrix(s.d_attn, s.bottleneck);
        p.attn.U_f = Matrix(s.d_attn, s.window);
        p.attn.v_f = Matrix(s.d_attn, 1);
        p.attn.Wq_t = Matrix(s.d_attn, s.bottleneck);
        p.attn.W_h = Matrix(s.d_attn, s.hidden2);
        p.attn.E = Matrix(s.features, s.d_embed);
        p.attn.U_t = Matrix(s.d_attn, s.d_embed);
        p.attn.v_t = Matrix(s.d_attn, 1);
        p.attn.W_c = Matrix(s.d_ctx, s.d_attn + s.d_embed);
        p.attn.b_c = Matrix(s.d_ctx, 1);
        p.W_init = Matrix(s.hidden2, s.bottleneck + s.d_ctx);
        p.b_init = Matrix(s.hidden2, 1);
        p.dec1 = LstmLayerParams::zeros(s.features, s.hidden2);
        p.dec2 = LstmLayerParams::zeros(s.hidden2, s.hidden1);
        p.W_out = Matrix(s.features, s.hidden1);
        p.b_out = Matrix(s.features, 1);
        return p;
    }

    // Seeded initialization. The attention score vectors v_f/v_t start at
    // zero so both softmaxes open exactly uniform; they move only as far as
    // the reconstruction loss pulls them.
    static ModelParams init(const ModelShape& s, double dropout_rate, Rng& rng) {
        ModelParams p = zeros(s, dropout_rate);
        p.enc1 = init_lstm(s.features, s.hidden1, rng);
        p.enc2 = init_lstm(s.hidden1, s.hidden2, rng);
        init_uniform(p.Wb, rng);
        init_uniform(p.attn.Wq_f, rng);
        init_uniform(p.attn.U_f, rng);
        init_uniform(p.attn.Wq_t, rng);
        init_uniform(p.attn.W_h, rng);
        init_uniform(p.attn.E, rng);
        init_uniform(p.attn.U_t, rng);
        init_uniform(p.attn.W_c, rng);
        init_uniform(p.W_init, rng);
        p.dec1 = init_lstm(s.features, s.hidden2, rng);
        p.dec2 = init_lstm(s.hidden2, s.hidden1, rng);
        init_uniform(p.W_out, rng);
        return p;
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        auto layer = [&](const char* prefix, LstmLayerParams& l) {
            fn(std::string(prefix) + ".Wi", l.Wi);
            fn(std::string(prefix) + ".Wf", l.Wf);
            fn(std::string(prefix) + ".Wg", l.Wg);
            fn(std::string(prefix) + ".Wo", l.Wo);
            fn(std::string(prefix) + ".Ui", l.Ui);
            fn(std::string(prefix) + ".Uf", l.Uf);
            fn(std::string(prefix) + ".Ug", l.Ug);
            fn(std::string(prefix) + ".Uo", l.Uo);
            fn(std::string(prefix) + ".bi", l.bi);
            fn(std::string(prefix) + ".bf", l.bf);
            fn(std::string(prefix) + ".bg", l.bg);
            fn(std::string(prefix) + ".bo", l.bo);
        };
        layer("enc1", enc1);
        layer("enc2", enc2);
        fn("bottleneck.W", Wb);
        fn("bottleneck.b", bb);
        fn("attn.Wq_f", attn.Wq_f);
        fn("attn.U_f", attn.U_f);
        fn("attn.v_f", attn.v_f);
        fn("attn.Wq_t", attn.Wq_t);
        fn("attn.W_h", attn.W_h);
        fn("attn.E", attn.E);
        fn("attn.U_t", attn.U_t);
        fn("attn.v_t", attn.v_t);
        fn("attn.W_c", attn.W_c);
        fn("attn.b_c", attn.b_c);
        fn("dec_init.W", W_init);
        fn("dec_init.b", b_init);
        layer("dec1", dec1);
        layer("dec2", dec2);
        fn("out.W", W_out);
        fn("out.b", b_out);
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        const_cast<ModelParams*>(this)->for_each_tensor(
            [&](const std::string& name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
    }
};

// ---- LSTM cell -------------------------------------------------------------

struct LstmStepCache {
    Vec x, h_prev, c_prev;
    Vec i, f, g, o, c, tanh_c;
};

inline void lstm_cell_forward(const Vec& x, const Vec& h_prev, const Vec& c_prev,
                              const LstmLayerParams& p, Vec& h_out, Vec& c_out,
                              LstmStepCache* cache) {
    if (x.size() != p.input())
        throw shape_error("lstm_cell_forward: input size " + std::to_string(x.size()) +
                          " != layer input " + std::to_string(p.input()));
    if (h_prev.size() != p.hidden() || c_prev.size() != p.hidden())
        throw shape_error("lstm_cell_forward: state size mismatch");
    const std::size_t H = p.hidden();
    Vec ai = matvec(p.Wi, x), af = matvec(p.Wf, x), ag = matvec(p.Wg, x), ao = matvec(p.Wo, x);
    for (std::size_t k = 0; k < H; ++k) {
        ai[k] += p.bi(k, 0);
        af[k] += p.bf(k, 0);
        ag[k] += p.bg(k, 0);
        ao[k] += p.bo(k, 0);
    }
    // recurrent contributions
    for (std::size_t r = 0; r < H; ++r) {
        const double hp = h_prev[r];
        if (hp == 0.0) continue;
        for (std::size_t k = 0; k < H; ++k) {
            ai[k] += p.Ui(k, r) * hp;
            af[k] += p.Uf(k, r) * hp;
            ag[k] += p.Ug(k, r) * hp;
            ao[k] += p.Uo(k, r) * hp;
        }
    }
    Vec i(H), f(H), g(H), o(H), c(H), tanh_c(H);
    for (std::size_t k = 0; k < H; ++k) {
        i[k] = sigmoid(ai[k]);
        f[k] = sigmoid(af[k]);
        g[k] = std::tanh(ag[k]);
        o[k] = sigmoid(ao[k]);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = std::tanh(c[k]);
    }
    h_out.resize(H);
    c_out.resize(H);
    for (std::size_t k = 0; k < H; ++k) {
        h_out[k] = o[k] * tanh_c[k];
        c_out[k] = c[k];
    }
    if (cache) {
        cache->x = x;
        cache->h_prev = h_prev;
        cache->c_prev = c_prev;
        cache->i = std::move(i);
        cache->f = std::move(f);
        cache->g = std::move(g);
        cache->o = std::move(o);
        cache->c = std::move(c);
        cache->tanh_c = std::move(tanh_c);
    }
}

struct LstmLayerGrads {
    LstmLayerParams g;  // same shapes, used as accumulators
    static LstmLayerGrads zeros_like(const LstmLayerParams& p) {
        return {LstmLayerParams::zeros(p.input(), p.hidden())};
    }
};

// Standard cell backward. dh/dc are gradients flowing into h_t and c_t;
// outputs accumulate into dx, dh_prev, dc_prev.
inline void lstm_cell_backward(const LstmStepCache& s, const LstmLayerParams& p, const Vec& dh,
                               const Vec& dc_in, LstmLayerParams& g, Vec& dx, Vec& dh_prev,
                               Vec& dc_prev) {
    const std::size_t H = p.hidden();
    Vec dai(H), daf(H), dag(H), dao(H);
    for (std::size_t k = 0; k < H; ++k) {
        const double dct = dc_in[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
        const double do_ = dh[k] * s.tanh_c[k];
        dao[k] = do_ * s.o[k] * (1.0 - s.o[k]);
        const double di = dct * s.g[k];
        dai[k] = di * s.i[k] * (1.0 - s.i[k]);
        const double dg = dct * s.i[k];
        dag[k] = dg * (1.0 - s.g[k] * s.g[k]);
        const double df = dct * s.c_prev[k];
        daf[k] = df * s.f[k] * (1.0 - s.f[k]);
        dc_prev[k] += dct * s.f[k];
    }
    add_outer(g.Wi, dai, s.x);
    add_outer(g.Wf, daf, s.x);
    add_outer(g.Wg, dag, s.x);
    add_outer(g.Wo, dao, s.x);
    add_outer(g.Ui, dai, s.h_prev);
    add_outer(g.Uf, daf, s.h_prev);
    add_outer(g.Ug, dag, s.h_prev);
    add_outer(g.Uo, dao, s.h_prev);
    for (std::size_t k = 0; k < H; ++k) {
        g.bi(k, 0) += dai[k];
        g.bf(k, 0) += daf[k];
        g.bg(k, 0) += dag[k];
        g.bo(k, 0) += dao[k];
    }
    mat_t_vec_add(p.Wi, dai, dx);
    mat_t_vec_add(p.Wf, daf, dx);
    mat_t_vec_add(p.Wg, dag, dx);
    mat_t_vec_add(p.Wo, dao, dx);
    mat_t_vec_add(p.Ui, dai, dh_prev);
    mat_t_vec_add(p.Uf, daf, dh_prev);
    mat_t_vec_add(p.Ug, dag, dh_prev);
    mat_t_vec_add(p.Uo, dao, dh_prev);
}

// ---- full model forward ------------------------------------------------------

enum class Mode { Train, Infer };

struct ForwardCache {
    Matrix window;
    Matrix mask;  // 1 x hidden1 inverted-dropout mask (all ones at inference)
    std::vector<LstmStepCache> enc1_steps, enc2_steps;
    Matrix H;  // T x hidden2
    Vec h_last;
    Vec z;
    AttnCache attn;
    Vec ctx;
    Vec s0;  // [z; ctx]
    Vec h1_init;
    std::vector<LstmStepCache> dec1_steps, dec2_steps;
    Matrix recon;
};

// Encoder only: returns the layer-2 hidden sequence and the latent code.
// The dropout mask between the encoder layers is drawn once per call and
// shared across timesteps.
inline void encode(const Matrix& window, const ModelParams& p, Mode mode, Rng& rng, Matrix& H_out,
                   Vec& z_out, ForwardCache* cache) {
    const auto& s = p.shape;
    if (window.rows() != s.window || window.cols() != s.features)
        throw shape_error("encode: window " + window.shape_str() + " does not match model " +
                          std::to_string(s.window) + "x" + std::to_string(s.features));
    const std::size_t T = s.window;
    Matrix mask = (mode == Mode::Train && p.dropout_rate > 0.0)
                      ? dropout_mask(1, s.hidden1, p.dropout_rate, rng)
                      : Matrix(1, s.hidden1, 1.0);
    Vec h1(s.hidden1, 0.0), c1(s.hidden1, 0.0), h2(s.hidden2, 0.0), c2(s.hidden2, 0.0);
    H_out = Matrix(T, s.hidden2);
    if (cache) {
        cache->enc1_steps.resize(T);
        cache->enc2_steps.resize(T);
    }
    for (std::size_t t = 0; t < T; ++t) {
        Vec h1n, c1n;
        lstm_cell_forward(window.row_vec(t), h1, c1, p.enc1, h1n, c1n,
                          cache ? &cache->enc1_steps[t] : nullptr);
        h1 = std::move(h1n);
        c1 = std::move(c1n);
        Vec xd(s.hidden1);
        for (std::size_t k = 0; k < s.hidden1; ++k) xd[k] = h1[k] * mask(0, k);
        Vec h2n, c2n;
        lstm_cell_forward(xd, h2, c2, p.enc2, h2n, c2n, cache ? &cache->enc2_steps[t] : nullptr);
        h2 = std::move(h2n);
        c2 = std::move(c2n);
        for (std::size_t k = 0; k < s.hidden2; ++k) H_out(t, k) = h2[k];
    }
    z_out = matvec(p.Wb, h2);
    for (std::size_t k = 0; k < s.bottleneck; ++k) z_out[k] += p.bb(k, 0);
    if (cache) {
        cache->mask = std::move(mask);
        cache->H = H_out;
        cache->h_last = h2;
        cache->z = z_out;
    }
}

// Decoder only: autoregressive unroll seeded by [z; context].
inline Matrix decode(const Vec& z, const Vec& ctx, const ModelParams& p, ForwardCache* cache) {
    const auto& s = p.shape;
    if (z.size() != s.bottleneck || ctx.size() != s.d_ctx)
        throw shape_error("decode: latent/context size mismatch");
    Vec s0;
    s0.reserve(s.bottleneck + s.d_ctx);
    s0.insert(s0.end(), z.begin(), z.end());
    s0.insert(s0.end(), ctx.begin(), ctx.end());
    Vec h1 = matvec(p.W_init, s0);
    for (std::size_t k = 0; k < s.hidden2; ++k) h1[k] += p.b_init(k, 0);
    Vec c1(s.hidden2, 0.0), h2(s.hidden1, 0.0), c2(s.hidden1, 0.0);
    Vec x(s.features, 0.0);
    Matrix recon(s.window, s.features);
    if (cache) {
        cache->s0 = s0;
        cache->h1_init = h1;
        cache->dec1_steps.resize(s.window);
        cache->dec2_steps.resize(s.window);
    }
    for (std::size_t t = 0; t < s.window; ++t) {
        Vec h1n, c1n;
        lstm_cell_forward(x, h1, c1, p.dec1, h1n, c1n, cache ? &cache->dec1_steps[t] : nullptr);
        h1 = std::move(h1n);
        c1 = std::move(c1n);
        Vec h2n, c2n;
        lstm_cell_forward(h1, h2, c2, p.dec2, h2n, c2n, cache ? &cache->dec2_steps[t] : nullptr);
        h2 = std::move(h2n);
        c2 = std::move(c2n);
        Vec y = matvec(p.W_out, h2);
        for (std::size_t k = 0; k < s.features; ++k) y[k] += p.b_out(k, 0);
        for (std::size_t k = 0; k < s.features; ++k) recon(t, k) = y[k];
        x = std::move(y);
    }
    if (cache) cache->recon = recon;
    return recon;
}

struct ForwardResult {
    Matrix recon;
    AttentionReport report;
    ForwardCache cache;
};

inline ForwardResult forward(const Matrix& window, const ModelParams& p, Mode mode, Rng& rng,
                             bool keep_cache = false) {
    ForwardResult r;
    ForwardCache* cache = keep_cache ? &r.cache : nullptr;
    if (cache) cache->window = window;
    Matrix H;
    Vec z;
    encode(window, p, mode, rng, H, z, cache);
    AttnCache* ac = cache ? &r.cache.attn : nullptr;
    Vec ctx = attention_forward(z, H, window, p.attn, r.report, ac);
    if (cache) cache->ctx = ctx;
    r.recon = decode(z, ctx, p, cache);
    return r;
}

inline double mse_loss(const Matrix& recon, const Matrix& target) {
    require_same_shape(recon, target, "mse_loss");
    double acc = 0.0;
    const double* a = recon.data();
    const double* b = target.data();
    for (std::size_t k = 0; k < recon.size(); ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
    }
    return acc / static_cast<double>(recon.size());
}

// ---- backward ----------------------------------------------------------------

// Backward through the decoder stack including the autoregressive feedback.
// Returns gradients w.r.t. z and context via ds0.
inline void backward_decoder(const ForwardCache& c, const ModelParams& p, const Matrix& recon,
                             const Matrix& target, double scale, ModelParams& g, Vec& dz,
                             Vec& dctx) {
    const auto& s = p.shape;
    const std::size_t T = s.window;
    const double norm = scale * 2.0 / static_cast<double>(recon.size());
    Vec dh1_next(s.hidden2, 0.0), dc1_next(s.hidden2, 0.0);
    Vec dh2_next(s.hidden1, 0.0), dc2_next(s.hidden1, 0.0);
    Vec dx_next(s.features, 0.0);  // gradient into the autoregressive input of step t+1
    for (std::size_t ti = T; ti-- > 0;) {
        Vec dy(s.features);
        for (std::size_t k = 0; k < s.features; ++k) {
            dy[k] = norm * (recon(ti, k) - target(ti, k));
            if (ti + 1 < T) dy[k] += dx_next[k];
        }
        // h2 of step ti is o * tanh_c of that step's cache.
        Vec h2(s.hidden1);
        for (std::size_t k = 0; k < s.hidden1; ++k)
            h2[k] = c.dec2_steps[ti].o[k] * c.dec2_steps[ti].tanh_c[k];
        add_outer(g.W_out, dy, h2);
        for (std::size_t k = 0; k < s.features; ++k) g.b_out(k, 0) += dy[k];
        Vec dh2(s.hidden1, 0.0);
        mat_t_vec_add(p.W_out, dy, dh2);
        axpy(1.0, dh2_next, dh2);
        Vec dh1_from2(s.hidden2, 0.0);
        Vec dh2_prev(s.hidden1, 0.0), dc2_prev(s.hidden1, 0.0);
        lstm_cell_backward(c.dec2_steps[ti], p.dec2, dh2, dc2_next, g.dec2, dh1_from2, dh2_prev,
                           dc2_prev);
        dh2_next = std::move(dh2_prev);
        dc2_next = std::move(dc2_prev);

        Vec dh1 = dh1_from2;
        axpy(1.0, dh1_next, dh1);
        Vec dx(s.features, 0.0);
        Vec dh1_prev(s.hidden2, 0.0), dc1_prev(s.hidden2, 0.0);
        lstm_cell_backward(c.dec1_steps[ti], p.dec1, dh1, dc1_next, g.dec1, dx, dh1_prev,
                           dc1_prev);
        dh1_next = std::move(dh1_prev);
        dc1_next = std::move(dc1_prev);
        dx_next = std::move(dx);
    }
    // dh1_next now holds the gradient at the decoder's initial hidden state.
    add_outer(g.W_init, dh1_next, c.s0);
    for (std::size_t k = 0; k < s.hidden2; ++k) g.b_init(k, 0) += dh1_next[k];
    Vec ds0(c.s0.size(), 0.0);
    mat_t_vec_add(p.W_init, dh1_next, ds0);
    for (std::size_t k = 0; k < s.bottleneck; ++k) dz[k] += ds0[k];
    for (std::size_t k = 0; k < s.d_ctx; ++k) dctx[k] += ds0[s.bottleneck + k];
}

// Backward through bottleneck and both encoder layers given gradients on z
// and on the hidden sequence H.
inline void backward_encoder(const ForwardCache& c, const ModelParams& p, const Vec& dz,
                             const Matrix& dH_in, ModelParams& g) {
    const auto& s = p.shape;
    const std::size_t T = s.window;
    Matrix dH = dH_in;
    // bottleneck: z = Wb h_last + bb
    add_outer(g.Wb, dz, c.h_last);
    for (std::size_t k = 0; k < s.bottleneck; ++k) g.bb(k, 0) += dz[k];
    {
        Vec dh_last(s.hidden2, 0.0);
        mat_t_vec_add(p.Wb, dz, dh_last);
        for (std::size_t k = 0; k < s.hidden2; ++k) dH(T - 1, k) += dh_last[k];
    }
    // encoder layer 2 BPTT, collecting the gradient into each dropout output
    std::vector<Vec> dxd(T);
    {
        Vec dh(s.hidden2, 0.0), dc(s.hidden2, 0.0);
        for (std::size_t ti = T; ti-- > 0;) {
            Vec dh_t = dH.row_vec(ti);
            axpy(1.0, dh, dh_t);
            dxd[ti].assign(s.hidden1, 0.0);
            Vec dh_prev(s.hidden2, 0.0), dc_prev(s.hidden2, 0.0);
            lstm_cell_backward(c.enc2_steps[ti], p.enc2, dh_t, dc, g.enc2, dxd[ti], dh_prev,
                               dc_prev);
            dh = std::move(dh_prev);
            dc = std::move(dc_prev);
        }
    }
    // encoder layer 1 BPTT through the shared dropout mask
    {
        Vec dh(s.hidden1, 0.0), dc(s.hidden1, 0.0);
        Vec sink(s.features, 0.0);
        for (std::size_t ti = T; ti-- > 0;) {
            Vec dh_t(s.hidden1);
            for (std::size_t k = 0; k < s.hidden1; ++k)
                dh_t[k] = dxd[ti][k] * c.mask(0, k) + dh[k];
            Vec dh_prev(s.hidden1, 0.0), dc_prev(s.hidden1, 0.0);
            std::fill(sink.begin(), sink.end(), 0.0);
            lstm_cell_backward(c.enc1_steps[ti], p.enc1, dh_t, dc, g.enc1, sink, dh_prev,
                               dc_prev);
            dh = std::move(dh_prev);
            dc = std::move(dc_prev);
        }
    }
}

// Gradients of scale * mse_loss(recon, target) w.r.t. every parameter.
inline ModelParams backward(const ForwardCache& cache, const ModelParams& p, const Matrix& target,
                            double scale = 1.0) {
    if (cache.enc1_steps.empty() || cache.dec1_steps.empty())
        throw std::logic_error("backward: cache is empty; run forward with keep_cache=true");
    ModelParams g = ModelParams::zeros(p.shape, p.dropout_rate);
    const auto& s = p.shape;
    Vec dz(s.bottleneck, 0.0);
    Vec dctx(s.d_ctx, 0.0);
    backward_decoder(cache, p, cache.recon, target, scale, g, dz, dctx);
    Matrix dH(s.window, s.hidden2);
    AttentionGrads ag = AttentionGrads::zeros_like(p.attn);
    attention_backward(cache.attn, cache.window, cache.H, p.attn, dctx, ag, dz, dH);
    g.attn.Wq_f = ag.Wq_f;
    g.attn.U_f = ag.U_f;
    g.attn.v_f = ag.v_f;
    g.attn.Wq_t = ag.Wq_t;
    g.attn.W_h = ag.W_h;
    g.attn.E = ag.E;
    g.attn.U_t = ag.U_t;
    g.attn.v_t = ag.v_t;
    g.attn.W_c = ag.W_c;
    g.attn.b_c = ag.b_c;
    backward_encoder(cache, p, dz, dH, g);
    return g;
}

// ---- checkpoint ---------------------------------------------------------------

inline nlohmann::json model_to_json(const ModelParams& p, const Hyperparams& hp,
                                    const std::string& bounds_provenance) {
    nlohmann::json j;
    j["format"] = "attnae-checkpoint";
    j["version"] = 1;
    j["hyperparams"] = hyperparams_to_json(hp);
    j["features"] = p.shape.features;
    j["dropout_rate"] = p.dropout_rate;
    j["bounds_provenance"] = bounds_provenance;
    nlohmann::json tensors;
    p.for_each_tensor([&](const std::string& name, const Matrix& m) {
        tensors[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.raw()}};
    });
    j["tensors"] = tensors;
    return j;
}

struct Checkpoint {
    ModelParams params;
    Hyperparams hyperparams;
    std::string bounds_provenance;
};

inline Checkpoint model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "attnae-checkpoint")
        throw parse_error("checkpoint: unrecognized format tag");
    if (j.value("version", 0) != 1) throw parse_error("checkpoint: unsupported version");
    Checkpoint ck;
    ck.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    const auto features = j.at("features").get<std::size_t>();
    ck.bounds_provenance = j.value("bounds_provenance", "");
    const ModelShape shape = ModelShape::from_hyperparams(ck.hyperparams, features);
    ck.params = ModelParams::zeros(shape, j.value("dropout_rate", ck.hyperparams.dropout));
    const auto& tensors = j.at("tensors");
    ck.params.for_each_tensor([&](const std::string& name, Matrix& m) {
        if (!tensors.contains(name)) throw parse_error("checkpoint: missing tensor " + name);
        const auto& tj = tensors[name];
        if (tj.at("rows").get<std::size_t>() != m.rows() ||
            tj.at("cols").get<std::size_t>() != m.cols())
            throw parse_error("checkpoint: tensor " + name + " has unexpected shape");
        const auto data = tj.at("data").get<std::vector<double>>();
        if (data.size() != m.size()) throw parse_error("checkpoint: tensor " + name + " size");
        std::copy(data.begin(), data.end(), m.raw().begin());
    });
    return ck;
}

inline void save_checkpoint(const ModelParams& p, const Hyperparams& hp,
                            const std::string& bounds_provenance, const std::string& path) {
    auto out = open_output(path);
    out << model_to_json(p, hp, bounds_provenance).dump() << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    return model_from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace attnae
