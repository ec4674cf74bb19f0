#include "wappo/confusion.hpp"

#include "wappo/rng.hpp"

#include <cmath>
#include <string>

namespace wappo {

namespace {

constexpr double kLeakySlope = 0.01;

std::vector<double> init_uniform(std::size_t fan_in, std::size_t fan_out, std::size_t count,
                                 Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(count);
    for (auto& e : v) e = rng.uniform(-bound, bound);
    return v;
}

}  // namespace

CriticNet::CriticNet(int in_dim, int hidden_layers, int hidden_width, std::uint64_t seed)
    : in_dim_(in_dim), hidden_layers_(hidden_layers) {
    if (hidden_layers < 1) throw TensorError("critic: needs at least one hidden layer");
    Rng rng(seed);
    std::size_t in = in_dim, out = hidden_width;
    for (int l = 0; l < hidden_layers; ++l) {
        std::string p = "h" + std::to_string(l);
        params_.emplace(p + ".w",
                        Tensor::parameter(p + ".w", {in, out}, init_uniform(in, out, in * out, rng)));
        params_.emplace(p + ".b", Tensor::parameter(p + ".b", {out}, std::vector<double>(out, 0.0)));
        in = out;
    }
    params_.emplace("out.w", Tensor::parameter("out.w", {in, 1}, init_uniform(in, 1, in, rng)));
    params_.emplace("out.b", Tensor::parameter("out.b", {1}, std::vector<double>(1, 0.0)));
}

Tensor CriticNet::score(const Tensor& reps, bool frozen) const {
    if (reps.cols() != static_cast<std::size_t>(in_dim_))
        throw TensorError("critic: representation dimension mismatch");
    auto param = [&](const std::string& name) -> Tensor {
        const Tensor& p = params_.at(name);
        return frozen ? ops::detach(p) : p;
    };
    Tensor h = reps;
    for (int l = 0; l < hidden_layers_; ++l) {
        std::string p = "h" + std::to_string(l);
        h = ops::leaky_relu(ops::affine(h, param(p + ".w"), param(p + ".b")), kLeakySlope);
    }
    return ops::affine(h, param("out.w"), param("out.b"));
}

Tensor critic_score(const CriticNet& critic, const Tensor& reps) { return critic.score(reps); }

double critic_update_step(CriticNet& critic, const Tensor& source_reps,
                          const Tensor& target_reps, RmsPropState& state, double lr, double c) {
    // Gradients of the two expectation terms are taken separately and
    // subtracted elementwise, so identical batches cancel bit-exactly.
    Tensor src_mean = ops::mean(critic.score(source_reps));
    Tensor tgt_mean = ops::mean(critic.score(target_reps));
    GradMap gs = backward(src_mean, critic.params());
    GradMap gt = backward(tgt_mean, critic.params());
    GradMap grads;
    for (auto& [name, g] : gs) {
        auto& diff = grads[name];
        const auto& other = gt.at(name);
        diff.resize(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) diff[i] = g[i] - other[i];
    }
    rmsprop_step(critic.params(), grads, state, lr, StepDirection::Ascent);
    clamp_params(critic.params(), c);
    return src_mean.item() - tgt_mean.item();
}

double wasserstein_estimate(const CriticNet& critic, const Tensor& source_reps,
                            const Tensor& target_reps) {
    if (source_reps.rows() == 0 || target_reps.rows() == 0)
        throw TensorError("wasserstein_estimate: empty batch");
    NoGradGuard no_grad;
    Tensor w =
        ops::sub(ops::mean(critic.score(source_reps)), ops::mean(critic.score(target_reps)));
    return w.item();
}

Tensor confusion_loss(const CriticNet& critic, const Tensor& source_reps,
                      const Tensor& target_reps) {
    return ops::sub(ops::mean(critic.score(source_reps, /*frozen=*/true)),
                    ops::mean(critic.score(target_reps, /*frozen=*/true)));
}

Tensor rdr_loss(const Tensor& source_reps, const Tensor& target_reps) {
    if (source_reps.cols() != target_reps.cols())
        throw TensorError("rdr_loss: representation dimension mismatch");
    auto mean_rows = [](const Tensor& t) {
        std::size_t n = t.rows();
        std::vector<double> w(n, 1.0 / static_cast<double>(n));
        Tensor row = Tensor::constant({1, n}, std::move(w));
        return ops::affine(row, t, Tensor::zeros({t.cols()}));
    };
    Tensor d = ops::sub(mean_rows(source_reps), mean_rows(target_reps));
    return ops::sum(ops::square(d));
}

}  // namespace wappo
