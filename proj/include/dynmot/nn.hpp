#pragma once

// Penalization estimator of the super-replication value.  A feedforward
// network is attached to every hedging degree of freedom -- one u_i per
// marginal, one forward-position net H_i per trading date, one option-position
// net per active (quote date, maturity, option) triple -- and the penalized
// objective
//   (1/B) sum_b sum_i u_i(x_i^b) + (gamma/2) (1/B) sum_b max(Phi^b - Psi^b, 0)^2
// is minimized by Adam over sampled product batches.  The penalty is applied
// per sample inside the batch average: wrapping the positive part around the
// batch sum would let violations cancel across samples and stop enforcing
// super-replication.
//
// Everything is deterministic given the seed: uniforms come from explicit
// mt19937_64 bit manipulation and normals from our own Box-Muller, so no
// stdlib distribution variability leaks into results.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dynmot/common.hpp"
#include "dynmot/instruments.hpp"
#include "dynmot/marginals.hpp"

namespace dynmot {

namespace nndetail {

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1p-53;
}

// Standard normal via Box-Muller; the log argument is kept away from zero.
inline double normal(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53;
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace nndetail

// --- multilayer perceptron -----------------------------------------------------

// Rectifier hidden layers, identity output, parameters packed into one flat
// vector (weights row-major [out][in], then biases, per layer).
class Mlp {
  public:
    struct Layer {
        int in = 0, out = 0;
        std::size_t w_off = 0, b_off = 0;
    };

    explicit Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
        if (widths_.size() < 2) throw ConfigError("mlp: need at least input and output widths");
        for (int w : widths_)
            if (w < 1) throw ConfigError("mlp: layer widths must be positive");
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            Layer lay;
            lay.in = widths_[l];
            lay.out = widths_[l + 1];
            lay.w_off = off;
            off += static_cast<std::size_t>(lay.in) * static_cast<std::size_t>(lay.out);
            lay.b_off = off;
            off += static_cast<std::size_t>(lay.out);
            layers_.push_back(lay);
        }
        theta_.assign(off, 0.0);
    }

    int input_width() const noexcept { return widths_.front(); }
    int output_width() const noexcept { return widths_.back(); }
    const std::vector<int>& widths() const noexcept { return widths_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<double>& theta() noexcept { return theta_; }
    const std::vector<double>& theta() const noexcept { return theta_; }

    // He-style initialization: weights N(0, 2/fan_in), biases zero.
    void he_init(std::mt19937_64& rng) {
        for (const Layer& l : layers_) {
            const double sd = std::sqrt(2.0 / l.in);
            for (int o = 0; o < l.out; ++o)
                for (int i = 0; i < l.in; ++i)
                    theta_[l.w_off + static_cast<std::size_t>(o) * l.in + i] =
                        sd * nndetail::normal(rng);
            for (int o = 0; o < l.out; ++o) theta_[l.b_off + static_cast<std::size_t>(o)] = 0.0;
        }
    }

    void validate() const {
        require_finite(theta_, "mlp");
    }

    // Single-sample evaluation (tests and diagnostics; training is batched).
    double forward(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != input_width())
            throw ConfigError("mlp: input width mismatch");
        std::vector<double> a(x.begin(), x.end()), next;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const Layer& lay = layers_[l];
            next.assign(static_cast<std::size_t>(lay.out), 0.0);
            for (int o = 0; o < lay.out; ++o) {
                double z = theta_[lay.b_off + static_cast<std::size_t>(o)];
                const double* w = &theta_[lay.w_off + static_cast<std::size_t>(o) * lay.in];
                for (int i = 0; i < lay.in; ++i) z += w[i] * a[static_cast<std::size_t>(i)];
                next[static_cast<std::size_t>(o)] =
                    (l + 1 < layers_.size()) ? std::max(z, 0.0) : z;
            }
            a.swap(next);
        }
        return a[0];
    }

  private:
    std::vector<int> widths_;
    std::vector<Layer> layers_;
    std::vector<double> theta_;
};

// Reusable batch buffers: activations per layer (row-major batch x width),
// pre-activation signs are recovered from the activations themselves.
struct MlpWorkspace {
    std::vector<std::vector<double>> a;   // a[0] = input, a.back() = output
    std::vector<double> out_cot;          // per-sample output cotangent
    std::vector<double> dz, dprev;        // backward scratch
};

// Forward pass over a row-major (batch x in) input; returns the output column.
inline const std::vector<double>& forward_batch(const Mlp& net, const double* input, int batch,
                                                MlpWorkspace& ws) {
    const auto& layers = net.layers();
    ws.a.resize(layers.size() + 1);
    ws.a[0].assign(input, input + static_cast<std::size_t>(batch) * net.input_width());
    const auto& theta = net.theta();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& lay = layers[l];
        const bool hidden = l + 1 < layers.size();
        ws.a[l + 1].assign(static_cast<std::size_t>(batch) * lay.out, 0.0);
        const std::vector<double>& in = ws.a[l];
        std::vector<double>& out = ws.a[l + 1];
        for (int b = 0; b < batch; ++b) {
            const double* arow = &in[static_cast<std::size_t>(b) * lay.in];
            double* orow = &out[static_cast<std::size_t>(b) * lay.out];
            for (int o = 0; o < lay.out; ++o) {
                double z = theta[lay.b_off + static_cast<std::size_t>(o)];
                const double* w = &theta[lay.w_off + static_cast<std::size_t>(o) * lay.in];
                for (int i = 0; i < lay.in; ++i) z += w[i] * arow[i];
                orow[o] = hidden ? std::max(z, 0.0) : z;
            }
        }
    }
    return ws.a.back();
}

// Reverse pass: accumulates the parameter gradient of sum_b out_cot[b]*out[b]
// into `grad` (same packing as theta).  Rectifier kinks use the inactive-side
// subgradient (slope zero at exactly zero activation).
inline void backward_batch(const Mlp& net, int batch, MlpWorkspace& ws, std::span<double> grad) {
    const auto& layers = net.layers();
    const auto& theta = net.theta();
    ws.dz = ws.out_cot;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& lay = layers[li];
        const std::vector<double>& ain = ws.a[li];
        // Parameter gradients of this layer.
        for (int b = 0; b < batch; ++b) {
            const double* arow = &ain[static_cast<std::size_t>(b) * lay.in];
            const double* dzrow = &ws.dz[static_cast<std::size_t>(b) * lay.out];
            for (int o = 0; o < lay.out; ++o) {
                const double d = dzrow[o];
                if (d == 0.0) continue;
                double* gw = &grad[lay.w_off + static_cast<std::size_t>(o) * lay.in];
                for (int i = 0; i < lay.in; ++i) gw[i] += d * arow[i];
                grad[lay.b_off + static_cast<std::size_t>(o)] += d;
            }
        }
        if (li == 0) break;
        // Cotangent of the previous activation, masked by its rectifier.
        ws.dprev.assign(static_cast<std::size_t>(batch) * lay.in, 0.0);
        for (int b = 0; b < batch; ++b) {
            const double* dzrow = &ws.dz[static_cast<std::size_t>(b) * lay.out];
            double* drow = &ws.dprev[static_cast<std::size_t>(b) * lay.in];
            for (int o = 0; o < lay.out; ++o) {
                const double d = dzrow[o];
                if (d == 0.0) continue;
                const double* w = &theta[lay.w_off + static_cast<std::size_t>(o) * lay.in];
                for (int i = 0; i < lay.in; ++i) drow[i] += d * w[i];
            }
            const double* arow = &ain[static_cast<std::size_t>(b) * lay.in];
            for (int i = 0; i < lay.in; ++i)
                if (arow[i] <= 0.0) drow[i] = 0.0;
        }
        ws.dz.swap(ws.dprev);
    }
}

// --- Adam ------------------------------------------------------------------------

struct AdamState {
    double step = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<double> m, v;

    explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

// Standard bias-corrected update, in place.
inline void adam_step(AdamState& st, std::span<double> params, std::span<const double> grad) {
    if (st.m.size() != params.size() || grad.size() != params.size())
        throw ConfigError("adam_step: size mismatch");
    ++st.t;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
        const double mhat = st.m[i] / c1;
        const double vhat = st.v[i] / c2;
        params[i] -= st.step * mhat / (std::sqrt(vhat) + st.eps);
    }
}

// --- sampling ---------------------------------------------------------------------

// One sampled batch: paths drawn coordinatewise from the marginals (product
// sampling -- the penalty, not the sampler, enforces the martingale and
// calibration structure) and quotes drawn uniformly from the two band
// endpoints at the sampled prefix.
struct Batch {
    int size = 0, periods = 0, num_triples = 0;
    std::vector<double> x;    // size x periods, row-major prices
    std::vector<double> phi;  // payoff per sample
    std::vector<double> v;    // size x num_triples option payoffs
    std::vector<double> p;    // size x num_triples sampled quotes
};

inline Batch sample_batch(const MarginalSystem& ms, const std::vector<TradableOption>& options,
                          const std::vector<Triple>& triples, const PricingRule& rule,
                          const PayoffFunction& payoff, int batch, std::mt19937_64& rng) {
    if (batch < 1) throw ConfigError("sample_batch: batch size must be >= 1");
    if (!triples.empty() && !rule.restricted())
        throw ConfigError("sample_batch: quote sampling needs an interval rule");
    const int n = ms.periods();
    if (payoff.periods != n) throw ConfigError("sample_batch: payoff period mismatch");
    Batch out;
    out.size = batch;
    out.periods = n;
    out.num_triples = static_cast<int>(triples.size());
    out.x.resize(static_cast<std::size_t>(batch) * n);
    out.phi.resize(static_cast<std::size_t>(batch));
    out.v.resize(static_cast<std::size_t>(batch) * triples.size());
    out.p.resize(static_cast<std::size_t>(batch) * triples.size());

    // Cumulative weights once per marginal for inverse-CDF draws.
    std::vector<std::vector<double>> cum(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        const auto& w = ms.marginal(i).weights;
        auto& c = cum[static_cast<std::size_t>(i - 1)];
        c.resize(w.size());
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) c[k] = (acc += w[k]);
        c.back() = 1.0;
    }

    for (int b = 0; b < batch; ++b) {
        double* row = &out.x[static_cast<std::size_t>(b) * n];
        for (int i = 1; i <= n; ++i) {
            const double u = nndetail::uniform01(rng);
            const auto& c = cum[static_cast<std::size_t>(i - 1)];
            const std::size_t k = static_cast<std::size_t>(
                std::upper_bound(c.begin(), c.end(), u) - c.begin());
            row[i - 1] = ms.marginal(i).points[std::min(k, c.size() - 1)];
        }
        out.phi[static_cast<std::size_t>(b)] = payoff.eval(std::span<const double>(row, n));
        for (std::size_t tt = 0; tt < triples.size(); ++tt) {
            const Triple& t = triples[tt];
            const std::span<const double> prefix(row, static_cast<std::size_t>(t.i));
            const double lo = rule.lower(t, prefix);
            const double hi = rule.upper(t, prefix);
            out.v[static_cast<std::size_t>(b) * triples.size() + tt] =
                options[static_cast<std::size_t>(t.k)].payoff(row[t.j - 1]);
            out.p[static_cast<std::size_t>(b) * triples.size() + tt] =
                nndetail::uniform01(rng) < 0.5 ? lo : hi;
        }
    }
    return out;
}

// --- the penalized objective -------------------------------------------------------

// The full set of hedging networks.  Inputs are prices divided by
// `input_scale` and outputs are multiplied by `output_scale`; both default to
// s0 so that well-conditioned O(1) parameters express O(s0) hedges.  The
// scaling is a reparameterization only -- the represented function class is
// unchanged.
struct PenaltyNets {
    std::vector<Mlp> u;         // one per date, input width 1
    std::vector<Mlp> h_stock;   // one per date 1..n-1, input width i
    std::vector<Mlp> h_option;  // one per triple, input width t.i
    std::vector<Triple> triples;
    double input_scale = 1.0;
    double output_scale = 1.0;

    std::size_t parameter_count() const {
        std::size_t c = 0;
        for (const auto& net : u) c += net.theta().size();
        for (const auto& net : h_stock) c += net.theta().size();
        for (const auto& net : h_option) c += net.theta().size();
        return c;
    }
};

inline std::vector<int> layer_widths(int input, const std::vector<int>& hidden) {
    std::vector<int> w;
    w.push_back(input);
    for (int h : hidden) w.push_back(h);
    w.push_back(1);
    return w;
}

inline PenaltyNets make_penalty_nets(int periods, const std::vector<Triple>& triples,
                                     const std::vector<int>& hidden, double price_scale,
                                     std::mt19937_64& rng) {
    PenaltyNets nets;
    nets.triples = triples;
    nets.input_scale = price_scale;
    nets.output_scale = price_scale;
    for (int i = 1; i <= periods; ++i) nets.u.emplace_back(layer_widths(1, hidden));
    for (int i = 1; i <= periods - 1; ++i) nets.h_stock.emplace_back(layer_widths(i, hidden));
    for (const Triple& t : triples) nets.h_option.emplace_back(layer_widths(t.i, hidden));
    // He-initialized hidden features under a zero output head: the hedge
    // starts at the neutral Psi = 0 and grows smoothly, instead of the huge
    // random initial violations whose penalty gradients kill rectifier units.
    auto init = [&rng](Mlp& net) {
        net.he_init(rng);
        const auto& last = net.layers().back();
        for (std::size_t k = 0; k < static_cast<std::size_t>(last.in) * last.out; ++k)
            net.theta()[last.w_off + k] = 0.0;
    };
    for (auto& net : nets.u) init(net);
    for (auto& net : nets.h_stock) init(net);
    for (auto& net : nets.h_option) init(net);
    return nets;
}

// Hedge value Psi for one sample (diagnostics; training is batched).
inline double hedge_value(const PenaltyNets& nets, const std::vector<TradableOption>& options,
                          std::span<const double> x, std::span<const double> p) {
    const int n = static_cast<int>(nets.u.size());
    std::vector<double> feat(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        feat[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] / nets.input_scale;
    double psi = 0.0;
    for (int i = 0; i < n; ++i)
        psi += nets.output_scale *
               nets.u[static_cast<std::size_t>(i)].forward(
                   std::span<const double>(&feat[static_cast<std::size_t>(i)], 1));
    for (int i = 0; i < n - 1; ++i)
        psi += nets.output_scale *
               nets.h_stock[static_cast<std::size_t>(i)].forward(
                   std::span<const double>(feat.data(), static_cast<std::size_t>(i + 1))) *
               (x[static_cast<std::size_t>(i + 1)] - x[static_cast<std::size_t>(i)]);
    for (std::size_t tt = 0; tt < nets.triples.size(); ++tt) {
        const Triple& t = nets.triples[tt];
        const double v =
            options[static_cast<std::size_t>(t.k)].payoff(x[static_cast<std::size_t>(t.j - 1)]);
        psi += nets.output_scale *
               nets.h_option[tt].forward(
                   std::span<const double>(feat.data(), static_cast<std::size_t>(t.i))) *
               (v - p[tt]);
    }
    return psi;
}

// Scalar penalized loss for fixed networks on a batch (test/diagnostic path;
// the training loop fuses this with the gradient).
inline double penalized_loss(const PenaltyNets& nets, const Batch& batch, double gamma) {
    const int B = batch.size, n = batch.periods;
    const int T = batch.num_triples;
    double cost = 0.0, pen = 0.0;
    std::vector<double> feat(static_cast<std::size_t>(n));
    for (int b = 0; b < B; ++b) {
        const double* x = &batch.x[static_cast<std::size_t>(b) * n];
        for (int i = 0; i < n; ++i) feat[static_cast<std::size_t>(i)] = x[i] / nets.input_scale;
        double usum = 0.0, psi = 0.0;
        for (int i = 0; i < n; ++i) {
            const double ui = nets.output_scale *
                              nets.u[static_cast<std::size_t>(i)].forward(std::span<const double>(
                                  &feat[static_cast<std::size_t>(i)], 1));
            usum += ui;
            psi += ui;
        }
        for (int i = 0; i < n - 1; ++i)
            psi += nets.output_scale *
                   nets.h_stock[static_cast<std::size_t>(i)].forward(std::span<const double>(
                       feat.data(), static_cast<std::size_t>(i + 1))) *
                   (x[i + 1] - x[i]);
        for (int tt = 0; tt < T; ++tt) {
            const Triple& t = nets.triples[static_cast<std::size_t>(tt)];
            psi += nets.output_scale *
                   nets.h_option[static_cast<std::size_t>(tt)].forward(std::span<const double>(
                       feat.data(), static_cast<std::size_t>(t.i))) *
                   (batch.v[static_cast<std::size_t>(b) * T + tt] -
                    batch.p[static_cast<std::size_t>(b) * T + tt]);
        }
        const double viol = std::max(batch.phi[static_cast<std::size_t>(b)] - psi, 0.0);
        cost += usum;
        pen += viol * viol;
    }
    return cost / B + 0.5 * gamma * pen / B;
}

// --- training ----------------------------------------------------------------------

struct TrainConfig {
    std::vector<int> hidden = {32, 32};  // desk scale; paper scale via config
    int batch = 512;
    long iterations = 5000;
    double gamma = 1e4;
    double window = 0.05;  // trailing fraction averaged into the estimate
    double step = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;
    double adam_eps = 1e-8;
    unsigned long long seed = 1;
    int runs = 5;  // independent seeded runs averaged by estimate_bound

    void validate() const {
        std::vector<std::string> errs;
        if (batch < 1) errs.push_back("train.batch: must be >= 1");
        if (iterations < 1) errs.push_back("train.iterations: must be >= 1");
        if (!(gamma > 0.0)) errs.push_back("train.gamma: must be > 0");
        if (!(window > 0.0 && window <= 1.0)) errs.push_back("train.window: must be in (0,1]");
        if (!(step > 0.0)) errs.push_back("train.step: must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0)) errs.push_back("train.beta1: must be in [0,1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) errs.push_back("train.beta2: must be in [0,1)");
        if (runs < 1) errs.push_back("train.runs: must be >= 1");
        for (int h : hidden)
            if (h < 1) errs.push_back("train.hidden: widths must be >= 1");
        if (!errs.empty()) throw ConfigError(errs);
    }
};

struct TrainResult {
    double estimate = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> loss_history;  // one entry per iteration, pre-update
    unsigned long long seed = 0;
};

// Per-training-run scratch, reused across iterations.
struct PenaltyWorkspace {
    std::vector<MlpWorkspace> per_net;          // u..., h_stock..., h_option...
    std::vector<double> psi, viol, feat, column, prefix_in;
};

// Loss and exact reverse-mode gradient of the penalized objective, one flat
// gradient vector per network in the order u_1..u_n, H_1..H_{n-1}, then the
// option-position nets.  Returns the loss.
inline double loss_and_gradient(const PenaltyNets& nets, const Batch& batch, double gamma,
                                std::vector<std::vector<double>>& grads,
                                PenaltyWorkspace& ws) {
    const int B = batch.size, n = batch.periods, T = batch.num_triples;
    if (static_cast<int>(nets.u.size()) != n || nets.triples.size() != static_cast<std::size_t>(T))
        throw ConfigError("loss_and_gradient: networks do not match the batch shape");
    const std::size_t net_count = nets.u.size() + nets.h_stock.size() + nets.h_option.size();
    ws.per_net.resize(net_count);
    grads.resize(net_count);

    const double scale = nets.output_scale;
    ws.feat.resize(static_cast<std::size_t>(B) * n);
    for (std::size_t i = 0; i < ws.feat.size(); ++i)
        ws.feat[i] = batch.x[i] / nets.input_scale;

    // Forward every net on the batch, accumulating Psi per sample.
    ws.psi.assign(static_cast<std::size_t>(B), 0.0);
    double cost = 0.0;
    std::size_t wsi = 0;
    ws.column.resize(static_cast<std::size_t>(B));
    for (int i = 0; i < n; ++i) {
        for (int b = 0; b < B; ++b)
            ws.column[static_cast<std::size_t>(b)] = ws.feat[static_cast<std::size_t>(b) * n + i];
        const auto& out =
            forward_batch(nets.u[static_cast<std::size_t>(i)], ws.column.data(), B, ws.per_net[wsi++]);
        for (int b = 0; b < B; ++b) {
            ws.psi[static_cast<std::size_t>(b)] += scale * out[static_cast<std::size_t>(b)];
            cost += scale * out[static_cast<std::size_t>(b)];
        }
    }
    for (int i = 1; i <= n - 1; ++i) {
        ws.prefix_in.resize(static_cast<std::size_t>(B) * i);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < i; ++c)
                ws.prefix_in[static_cast<std::size_t>(b) * i + c] =
                    ws.feat[static_cast<std::size_t>(b) * n + c];
        const auto& out = forward_batch(nets.h_stock[static_cast<std::size_t>(i - 1)],
                                        ws.prefix_in.data(), B, ws.per_net[wsi++]);
        for (int b = 0; b < B; ++b)
            ws.psi[static_cast<std::size_t>(b)] +=
                scale * out[static_cast<std::size_t>(b)] *
                (batch.x[static_cast<std::size_t>(b) * n + i] -
                 batch.x[static_cast<std::size_t>(b) * n + i - 1]);
    }
    for (int tt = 0; tt < T; ++tt) {
        const Triple& t = nets.triples[static_cast<std::size_t>(tt)];
        ws.prefix_in.resize(static_cast<std::size_t>(B) * t.i);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < t.i; ++c)
                ws.prefix_in[static_cast<std::size_t>(b) * t.i + c] =
                    ws.feat[static_cast<std::size_t>(b) * n + c];
        const auto& out = forward_batch(nets.h_option[static_cast<std::size_t>(tt)],
                                        ws.prefix_in.data(), B, ws.per_net[wsi++]);
        for (int b = 0; b < B; ++b)
            ws.psi[static_cast<std::size_t>(b)] +=
                scale * out[static_cast<std::size_t>(b)] *
                (batch.v[static_cast<std::size_t>(b) * T + tt] -
                 batch.p[static_cast<std::size_t>(b) * T + tt]);
    }

    ws.viol.assign(static_cast<std::size_t>(B), 0.0);
    double pen = 0.0;
    for (int b = 0; b < B; ++b) {
        const double vb = std::max(
            batch.phi[static_cast<std::size_t>(b)] - ws.psi[static_cast<std::size_t>(b)], 0.0);
        ws.viol[static_cast<std::size_t>(b)] = vb;
        pen += vb * vb;
    }
    const double loss = cost / B + 0.5 * gamma * pen / B;

    // Backward: per-sample output cotangents, then reverse through each net.
    wsi = 0;
    auto run_backward = [&](const Mlp& net) {
        auto& g = grads[wsi];
        g.assign(net.theta().size(), 0.0);
        backward_batch(net, B, ws.per_net[wsi], g);
        ++wsi;
    };
    for (int i = 0; i < n; ++i) {
        auto& cot = ws.per_net[wsi].out_cot;
        cot.resize(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b)
            cot[static_cast<std::size_t>(b)] =
                scale * (1.0 - gamma * ws.viol[static_cast<std::size_t>(b)]) / B;
        run_backward(nets.u[static_cast<std::size_t>(i)]);
    }
    for (int i = 1; i <= n - 1; ++i) {
        auto& cot = ws.per_net[wsi].out_cot;
        cot.resize(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b)
            cot[static_cast<std::size_t>(b)] =
                -scale * gamma * ws.viol[static_cast<std::size_t>(b)] *
                (batch.x[static_cast<std::size_t>(b) * n + i] -
                 batch.x[static_cast<std::size_t>(b) * n + i - 1]) /
                B;
        run_backward(nets.h_stock[static_cast<std::size_t>(i - 1)]);
    }
    for (int tt = 0; tt < T; ++tt) {
        auto& cot = ws.per_net[wsi].out_cot;
        cot.resize(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b)
            cot[static_cast<std::size_t>(b)] =
                -scale * gamma * ws.viol[static_cast<std::size_t>(b)] *
                (batch.v[static_cast<std::size_t>(b) * T + tt] -
                 batch.p[static_cast<std::size_t>(b) * T + tt]) /
                B;
        run_backward(nets.h_option[static_cast<std::size_t>(tt)]);
    }
    return loss;
}

namespace nndetail {

// Nets, optimizer states and buffers for one seeded run.
struct Trainer {
    PenaltyNets nets;
    std::vector<AdamState> adam;  // aligned with gradient order
    std::vector<std::vector<double>> grads;
    PenaltyWorkspace ws;
    double gamma = 0.0;

    Trainer(const MarginalSystem& ms, const std::vector<TradableOption>& options,
            const PricingRule& rule, const TrainConfig& cfg, std::mt19937_64& rng)
        : nets(make_penalty_nets(ms.periods(),
                                 rule.restricted() ? active_triples(options, ms.periods())
                                                   : std::vector<Triple>{},
                                 cfg.hidden, ms.s0(), rng)),
          gamma(cfg.gamma) {
        auto add = [this, &cfg](const Mlp& net) {
            AdamState st(net.theta().size());
            st.step = cfg.step;
            st.beta1 = cfg.beta1;
            st.beta2 = cfg.beta2;
            st.eps = cfg.adam_eps;
            adam.push_back(std::move(st));
        };
        for (const auto& net : nets.u) add(net);
        for (const auto& net : nets.h_stock) add(net);
        for (const auto& net : nets.h_option) add(net);
    }

    Mlp& net_at(std::size_t idx) {
        if (idx < nets.u.size()) return nets.u[idx];
        idx -= nets.u.size();
        if (idx < nets.h_stock.size()) return nets.h_stock[idx];
        return nets.h_option[idx - nets.h_stock.size()];
    }

    double step(const Batch& batch) {
        const double loss = loss_and_gradient(nets, batch, gamma, grads, ws);
        for (std::size_t k = 0; k < adam.size(); ++k)
            adam_step(adam[k], net_at(k).theta(), grads[k]);
        return loss;
    }
};

}  // namespace nndetail

// One seeded run of the penalization scheme.  The estimate averages the loss
// over the trailing `window` fraction of iterations.
inline TrainResult train(const MarginalSystem& ms, const std::vector<TradableOption>& options,
                         const PricingRule& rule, const PayoffFunction& payoff,
                         const TrainConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    nndetail::Trainer tr(ms, options, rule, cfg, rng);

    TrainResult res;
    res.seed = cfg.seed;
    res.loss_history.reserve(static_cast<std::size_t>(cfg.iterations));
    for (long it = 0; it < cfg.iterations; ++it) {
        const Batch batch =
            sample_batch(ms, options, tr.nets.triples, rule, payoff, cfg.batch, rng);
        const double loss = tr.step(batch);
        if (!std::isfinite(loss))
            throw NumericalError("train: non-finite loss at iteration " + std::to_string(it) +
                                 " (seed " + std::to_string(cfg.seed) + ")");
        res.loss_history.push_back(loss);
    }
    long count = static_cast<long>(cfg.window * static_cast<double>(cfg.iterations) + 0.5);
    count = std::max(1L, std::min(count, cfg.iterations));
    double acc = 0.0;
    for (long i = cfg.iterations - count; i < cfg.iterations; ++i)
        acc += res.loss_history[static_cast<std::size_t>(i)];
    res.estimate = acc / static_cast<double>(count);
    return res;
}

// Average over cfg.runs independent seeded runs (seed, seed+1, ...).
struct EstimateResult {
    double estimate = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    std::vector<TrainResult> runs;
};

inline EstimateResult estimate_bound(const MarginalSystem& ms,
                                     const std::vector<TradableOption>& options,
                                     const PricingRule& rule, const PayoffFunction& payoff,
                                     const TrainConfig& cfg) {
    cfg.validate();
    EstimateResult out;
    double sum = 0.0;
    for (int r = 0; r < cfg.runs; ++r) {
        TrainConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + static_cast<unsigned long long>(r);
        out.runs.push_back(train(ms, options, rule, payoff, run_cfg));
        sum += out.runs.back().estimate;
    }
    out.estimate = sum / cfg.runs;
    if (cfg.runs > 1) {
        double ss = 0.0;
        for (const auto& r : out.runs) {
            const double d = r.estimate - out.estimate;
            ss += d * d;
        }
        out.std_error = std::sqrt(ss / (cfg.runs - 1)) / std::sqrt(static_cast<double>(cfg.runs));
    } else {
        out.std_error = 0.0;
    }
    return out;
}

// Loss-history export: one (iteration, loss) row per iteration.
inline void write_loss_csv(std::ostream& os, const std::vector<double>& history) {
    os << "iteration,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < history.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g", i, history[i]);
        os << buf << '\n';
    }
}

}  // namespace dynmot
