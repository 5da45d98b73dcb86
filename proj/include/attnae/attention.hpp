#pragma once

// Dual additive attention applied at the latent representation.
//
// Feature branch scores whole sensor columns of the scaled window against
// the latent code:
//     k_f = U_f * window[:,f]
//     e_f = v_f . tanh(Wq_f z + k_f)
//     alpha = softmax_f(e), feature context = sum_f alpha_f k_f
// Reported feature weights are F * alpha, so the uniform baseline is 1.0.
//
// Temporal branch scores every (t, f) cell conditioned on the hidden state:
//     u_tf  = window[t,f] * E[f]
//     e_tf  = v_t . tanh(Wq_t z + W_h H[t] + U_t u_tf)
//     A[t,:] = softmax_f(e_t), temporal context = (1/T) sum_tf A[t,f] u_tf
// Rows of A are normalized over features, so the uniform baseline is 1/F.
//
// Both contexts pass through one affine combination layer and seed the
// decoder, which is what trains every attention tensor through the
// reconstruction loss.

#include <vector>

#include "attnae/matrix.hpp"
#include "attnae/ops.hpp"
#include "attnae/rng.hpp"

namespace attnae {

struct AttentionParams {
    // feature branch
    Matrix Wq_f;  // d_a x Z
    Matrix U_f;   // d_a x T
    Matrix v_f;   // d_a x 1
    // temporal branch
    Matrix Wq_t;  // d_a x Z
    Matrix W_h;   // d_a x H2
    Matrix E;     // F x d_e
    Matrix U_t;   // d_a x d_e
    Matrix v_t;   // d_a x 1
    // context combination
    Matrix W_c;  // d_c x (d_a + d_e)
    Matrix b_c;  // d_c x 1

    std::size_t d_attn() const { return Wq_f.rows(); }
    std::size_t d_embed() const { return E.cols(); }
    std::size_t d_ctx() const { return W_c.rows(); }
};

struct AttentionReport {
    Vec feature_weights;    // F entries, sum = F
    Matrix temporal;        // T x F, each row sums to 1
    Vec feature_scores;     // raw alignment scores, F
    Matrix temporal_scores; // raw alignment scores, T x F
    Vec context;            // combined context, d_c
};

// Additive alignment primitive: e = v . tanh(W q + U k).
inline double alignment(const Vec& query, const Vec& key, const Matrix& W, const Matrix& U,
                        const Matrix& v) {
    Vec a = matvec(W, query);
    const Vec uk = matvec(U, key);
    if (a.size() != uk.size() || v.rows() != a.size() || v.cols() != 1)
        throw shape_error("alignment: incompatible projection widths");
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e += v(i, 0) * std::tanh(a[i] + uk[i]);
    return e;
}

struct AttnCache {
    Vec z;
    Vec qf;                              // Wq_f z
    std::vector<Vec> keys;               // per feature, d_a
    std::vector<Vec> th_f;               // tanh terms per feature, d_a
    Vec alpha;                           // F
    Vec qt;                              // Wq_t z
    std::vector<Vec> hterm;              // W_h H[t], per t
    std::vector<std::vector<Vec>> u;     // [T][F] value vectors, d_e
    std::vector<std::vector<Vec>> th_t;  // [T][F] tanh terms, d_a
    Matrix A;                            // T x F
    Vec ctx_f;                           // d_a
    Vec ctx_t;                           // d_e
    Vec concat;                          // d_a + d_e
};

inline void feature_attention(const Vec& z, const Matrix& window, const AttentionParams& p,
                              Vec& alpha_out, Vec& context_out, AttnCache* cache,
                              Vec* scores_out = nullptr) {
    const std::size_t F = window.cols();
    const std::size_t d_a = p.d_attn();
    const Vec qf = matvec(p.Wq_f, z);
    std::vector<Vec> keys(F);
    std::vector<Vec> th(F);
    Vec scores(F);
    for (std::size_t f = 0; f < F; ++f) {
        keys[f] = matvec(p.U_f, window.col_vec(f));
        th[f].resize(d_a);
        double e = 0.0;
        for (std::size_t i = 0; i < d_a; ++i) {
            th[f][i] = std::tanh(qf[i] + keys[f][i]);
            e += p.v_f(i, 0) * th[f][i];
        }
        scores[f] = e;
    }
    alpha_out = softmax(scores);
    context_out.assign(d_a, 0.0);
    for (std::size_t f = 0; f < F; ++f) axpy(alpha_out[f], keys[f], context_out);
    if (scores_out) *scores_out = scores;
    if (cache) {
        cache->qf = qf;
        cache->keys = std::move(keys);
        cache->th_f = std::move(th);
        cache->alpha = alpha_out;
    }
}

inline void temporal_attention(const Vec& z, const Matrix& H, const Matrix& window,
                               const AttentionParams& p, Matrix& A_out, Vec& context_out,
                               AttnCache* cache, Matrix* scores_out = nullptr) {
    const std::size_t T = window.rows();
    const std::size_t F = window.cols();
    const std::size_t d_a = p.d_attn();
    const std::size_t d_e = p.d_embed();
    if (p.E.rows() != F) throw shape_error("temporal_attention: E rows != feature count");
    if (H.rows() != T) throw shape_error("temporal_attention: H rows != window length");

    const Vec qt = matvec(p.Wq_t, z);
    std::vector<Vec> hterm(T);
    std::vector<std::vector<Vec>> u(T, std::vector<Vec>(F));
    std::vector<std::vector<Vec>> th(T, std::vector<Vec>(F));
    A_out = Matrix(T, F);
    Matrix scores(T, F);
    for (std::size_t t = 0; t < T; ++t) {
        hterm[t] = matvec(p.W_h, H.row_vec(t));
        Vec row(F);
        for (std::size_t f = 0; f < F; ++f) {
            u[t][f].resize(d_e);
            for (std::size_t j = 0; j < d_e; ++j) u[t][f][j] = window(t, f) * p.E(f, j);
            const Vec uu = matvec(p.U_t, u[t][f]);
            th[t][f].resize(d_a);
            double e = 0.0;
            for (std::size_t i = 0; i < d_a; ++i) {
                th[t][f][i] = std::tanh(qt[i] + hterm[t][i] + uu[i]);
                e += p.v_t(i, 0) * th[t][f][i];
            }
            row[f] = e;
            scores(t, f) = e;
        }
        const Vec arow = softmax(row);
        for (std::size_t f = 0; f < F; ++f) A_out(t, f) = arow[f];
    }
    context_out.assign(d_e, 0.0);
    const double invT = 1.0 / static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < F; ++f) axpy(A_out(t, f) * invT, u[t][f], context_out);
    if (scores_out) *scores_out = std::move(scores);
    if (cache) {
        cache->qt = qt;
        cache->hterm = std::move(hterm);
        cache->u = std::move(u);
        cache->th_t = std::move(th);
        cache->A = A_out;
    }
}

inline Vec combine_context(const Vec& ctx_f, const Vec& ctx_t, const AttentionParams& p,
                           AttnCache* cache) {
    Vec concat;
    concat.reserve(ctx_f.size() + ctx_t.size());
    concat.insert(concat.end(), ctx_f.begin(), ctx_f.end());
    concat.insert(concat.end(), ctx_t.begin(), ctx_t.end());
    Vec out = matvec(p.W_c, concat);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.b_c(i, 0);
    if (cache) {
        cache->ctx_f = ctx_f;
        cache->ctx_t = ctx_t;
        cache->concat = std::move(concat);
    }
    return out;
}

// Full attention stage. Returns the combined context and fills the report.
inline Vec attention_forward(const Vec& z, const Matrix& H, const Matrix& window,
                             const AttentionParams& p, AttentionReport& report,
                             AttnCache* cache) {
    const std::size_t F = window.cols();
    if (cache) cache->z = z;
    Vec alpha, ctx_f;
    feature_attention(z, window, p, alpha, ctx_f, cache, &report.feature_scores);
    Matrix A;
    Vec ctx_t;
    temporal_attention(z, H, window, p, A, ctx_t, cache, &report.temporal_scores);
    Vec ctx = combine_context(ctx_f, ctx_t, p, cache);

    report.feature_weights.resize(F);
    for (std::size_t f = 0; f < F; ++f)
        report.feature_weights[f] = static_cast<double>(F) * alpha[f];
    report.temporal = A;
    report.context = ctx;
    return ctx;
}

struct AttentionGrads {
    Matrix Wq_f, U_f, v_f, Wq_t, W_h, E, U_t, v_t, W_c, b_c;
    static AttentionGrads zeros_like(const AttentionParams& p) {
        AttentionGrads g;
        g.Wq_f = Matrix(p.Wq_f.rows(), p.Wq_f.cols());
        g.U_f = Matrix(p.U_f.rows(), p.U_f.cols());
        g.v_f = Matrix(p.v_f.rows(), 1);
        g.Wq_t = Matrix(p.Wq_t.rows(), p.Wq_t.cols());
        g.W_h = Matrix(p.W_h.rows(), p.W_h.cols());
        g.E = Matrix(p.E.rows(), p.E.cols());
        g.U_t = Matrix(p.U_t.rows(), p.U_t.cols());
        g.v_t = Matrix(p.v_t.rows(), 1);
        g.W_c = Matrix(p.W_c.rows(), p.W_c.cols());
        g.b_c = Matrix(p.b_c.rows(), 1);
        return g;
    }
};

// Backward through the whole attention stage. Adds parameter gradients into
// `g` and the upstream gradients into dz and dH.
inline void attention_backward(const AttnCache& c, const Matrix& window, const Matrix& H,
                               const AttentionParams& p, const Vec& dctx, AttentionGrads& g,
                               Vec& dz, Matrix& dH) {
    const std::size_t T = window.rows();
    const std::size_t F = window.cols();
    const std::size_t d_a = p.d_attn();
    const std::size_t d_e = p.d_embed();

    // combination layer
    add_outer(g.W_c, dctx, c.concat);
    for (std::size_t i = 0; i < dctx.size(); ++i) g.b_c(i, 0) += dctx[i];
    Vec dconcat(c.concat.size(), 0.0);
    mat_t_vec_add(p.W_c, dctx, dconcat);
    Vec dcf(dconcat.begin(), dconcat.begin() + static_cast<std::ptrdiff_t>(d_a));
    Vec dct(dconcat.begin() + static_cast<std::ptrdiff_t>(d_a), dconcat.end());

    // ---- temporal branch ----
    const double invT = 1.0 / static_cast<double>(T);
    Vec sum_dpre_q(d_a, 0.0);  // shared Wq_t z term accumulates over all cells
    for (std::size_t t = 0; t < T; ++t) {
        Vec dA_row(F), A_row(F);
        for (std::size_t f = 0; f < F; ++f) {
            A_row[f] = c.A(t, f);
            dA_row[f] = invT * dot(dct, c.u[t][f]);
        }
        const Vec de = softmax_backward(A_row, dA_row);
        Vec row_dpre(d_a, 0.0);  // shared W_h H[t] term accumulates over f
        for (std::size_t f = 0; f < F; ++f) {
            Vec du(d_e);
            for (std::size_t j = 0; j < d_e; ++j) du[j] = A_row[f] * invT * dct[j];
            const Vec& th = c.th_t[t][f];
            Vec dpre(d_a);
            for (std::size_t i = 0; i < d_a; ++i) {
                g.v_t(i, 0) += de[f] * th[i];
                dpre[i] = de[f] * p.v_t(i, 0) * (1.0 - th[i] * th[i]);
                row_dpre[i] += dpre[i];
            }
            add_outer(g.U_t, dpre, c.u[t][f]);
            mat_t_vec_add(p.U_t, dpre, du);
            // u = window[t,f] * E[f]
            for (std::size_t j = 0; j < d_e; ++j) g.E(f, j) += window(t, f) * du[j];
        }
        add_outer(g.W_h, row_dpre, H.row_vec(t));
        Vec dh(H.cols(), 0.0);
        mat_t_vec_add(p.W_h, row_dpre, dh);
        for (std::size_t j = 0; j < H.cols(); ++j) dH(t, j) += dh[j];
        axpy(1.0, row_dpre, sum_dpre_q);
    }
    add_outer(g.Wq_t, sum_dpre_q, c.z);
    mat_t_vec_add(p.Wq_t, sum_dpre_q, dz);

    // ---- feature branch ----
    Vec dalpha(F);
    for (std::size_t f = 0; f < F; ++f) dalpha[f] = dot(dcf, c.keys[f]);
    const Vec de_f = softmax_backward(c.alpha, dalpha);
    Vec sum_dpre_f(d_a, 0.0);
    for (std::size_t f = 0; f < F; ++f) {
        Vec dk(d_a);
        for (std::size_t i = 0; i < d_a; ++i) dk[i] = c.alpha[f] * dcf[i];
        const Vec& th = c.th_f[f];
        for (std::size_t i = 0; i < d_a; ++i) {
            g.v_f(i, 0) += de_f[f] * th[i];
            const double dpre = de_f[f] * p.v_f(i, 0) * (1.0 - th[i] * th[i]);
            sum_dpre_f[i] += dpre;
            dk[i] += dpre;  // score path shares the key with the value path
        }
        add_outer(g.U_f, dk, window.col_vec(f));
    }
    add_outer(g.Wq_f, sum_dpre_f, c.z);
    mat_t_vec_add(p.Wq_f, sum_dpre_f, dz);
}

struct AggregateWeights {
    Vec mean_feature;   // F, mean window feature weight per channel
    Vec mean_temporal;  // F, mean temporal weight per channel over all rows
};

inline AggregateWeights aggregate_reports(const std::vector<AttentionReport>& reports) {
    if (reports.empty()) throw std::domain_error("aggregate_reports: empty input");
    const std::size_t F = reports.front().feature_weights.size();
    AggregateWeights agg;
    agg.mean_feature.assign(F, 0.0);
    agg.mean_temporal.assign(F, 0.0);
    std::size_t rows = 0;
    for (const auto& r : reports) {
        if (r.feature_weights.size() != F || r.temporal.cols() != F)
            throw shape_error("aggregate_reports: inconsistent report shapes");
        for (std::size_t f = 0; f < F; ++f) agg.mean_feature[f] += r.feature_weights[f];
        for (std::size_t t = 0; t < r.temporal.rows(); ++t)
            for (std::size_t f = 0; f < F; ++f) agg.mean_temporal[f] += r.temporal(t, f);
        rows += r.temporal.rows();
    }
    for (std::size_t f = 0; f < F; ++f) {
        agg.mean_feature[f] /= static_cast<double>(reports.size());
        agg.mean_temporal[f] /= static_cast<double>(rows);
    }
    return agg;
}

}  // namespace attnae
