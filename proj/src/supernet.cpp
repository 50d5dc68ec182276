#include "asga/supernet.hpp"

#include <algorithm>
#include <cmath>

namespace asga {

void BitCandidates::validate() const {
    require(!weight_bits.empty() && !act_bits.empty(), "candidate bit lists must be nonempty");
    auto check = [](const std::vector<int>& bits, const char* which) {
        for (std::size_t i = 0; i < bits.size(); ++i) {
            require(bits[i] >= 2, std::string(which) + " candidate bits must be >= 2, got " +
                                      std::to_string(bits[i]));
            if (i > 0)
                require(bits[i] > bits[i - 1],
                        std::string(which) + " candidates must be strictly increasing");
        }
    };
    check(weight_bits, "weight");
    check(act_bits, "activation");
}

double layer_comp(const CostDims& d) {
    for (int v : {d.c_in, d.c_out, d.k_a, d.k_b, d.h_out, d.w_out})
        require(v >= 1, "cost dims must be >= 1");
    return static_cast<double>(d.c_in) * d.c_out * d.k_a * d.k_b * d.h_out * d.w_out;
}

std::vector<double> branch_probs(std::span<const double> logits) {
    require(!logits.empty(), "branch_probs: empty logits");
    double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (double& q : p) q /= z;
    return p;
}

double MpqPolicy::bops(const std::vector<PolicyLayer>& layers) {
    double total = 0.0;
    for (const auto& l : layers) total += static_cast<double>(l.w_bits) * l.a_bits * l.comp;
    return total;
}

Supernet Supernet::mlp(std::vector<int> layer_sizes, BitCandidates cands, bool fix_first_last,
                       int fixed_layer_bits, std::uint64_t init_seed) {
    require(layer_sizes.size() >= 2, "mlp needs at least input and output sizes");
    for (int s : layer_sizes) require(s >= 1, "layer sizes must be positive");
    cands.validate();
    if (fix_first_last) QuantSpec::weights(fixed_layer_bits).validate();

    Supernet net;
    net.sizes_ = std::move(layer_sizes);
    net.cands_ = std::move(cands);
    std::mt19937_64 rng(init_seed);
    const int n_layers = static_cast<int>(net.sizes_.size()) - 1;
    for (int l = 0; l < n_layers; ++l) {
        SupernetLayer layer;
        layer.name = "layer" + std::to_string(l);
        int fan_in = net.sizes_[static_cast<std::size_t>(l)];
        int fan_out = net.sizes_[static_cast<std::size_t>(l) + 1];
        layer.weights = net.weights_.add(
            layer.name + ".w", random_normal(fan_in, fan_out, rng, std::sqrt(2.0 / fan_in)));
        layer.dims = CostDims{fan_in, fan_out, 1, 1, 1, 1};
        layer.relu_act = l + 1 < n_layers;
        if (fix_first_last && (l == 0 || l == n_layers - 1)) {
            layer.fixed_bits = FixedBits{fixed_layer_bits, fixed_layer_bits};
        } else {
            layer.alpha = net.arch_.add(
                layer.name + ".alpha",
                Tensor(1, static_cast<int>(net.cands_.weight_bits.size())));
            layer.beta = net.arch_.add(
                layer.name + ".beta", Tensor(1, static_cast<int>(net.cands_.act_bits.size())));
        }
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

Var Supernet::mixture_forward(Tape& t, int layer_index, Var input) {
    require(layer_index >= 0 && layer_index < static_cast<int>(layers_.size()),
            "layer index out of range");
    const SupernetLayer& layer = layers_[static_cast<std::size_t>(layer_index)];
    Var w = t.param(weights_, layer.weights);

    Var z;
    if (layer.fixed_bits) {
        Var wq = bypass_ ? w : t.fake_quant(w, QuantSpec::weights(layer.fixed_bits->w_bits));
        z = t.matmul(input, wq);
    } else {
        Var probs = t.softmax_vec(t.param(arch_, layer.alpha));
        Var shared;  // one matmul suffices when every branch sees the same weights
        if (bypass_) shared = t.matmul(input, w);
        for (std::size_t j = 0; j < cands_.weight_bits.size(); ++j) {
            Var y = bypass_
                        ? shared
                        : t.matmul(input, t.fake_quant(w, QuantSpec::weights(cands_.weight_bits[j])));
            Var term = t.scale_var(y, t.entry(probs, static_cast<int>(j)));
            z = (j == 0) ? term : t.add(z, term);
        }
    }
    if (!layer.relu_act) return z;

    Var act = t.relu(z);
    if (layer.fixed_bits)
        return bypass_ ? act : t.fake_quant(act, QuantSpec::activations(layer.fixed_bits->a_bits));

    Var probs = t.softmax_vec(t.param(arch_, layer.beta));
    Var out;
    for (std::size_t k = 0; k < cands_.act_bits.size(); ++k) {
        Var aq = bypass_ ? act : t.fake_quant(act, QuantSpec::activations(cands_.act_bits[k]));
        Var term = t.scale_var(aq, t.entry(probs, static_cast<int>(k)));
        out = (k == 0) ? term : t.add(out, term);
    }
    return out;
}

Var Supernet::logits(Tape& t, Var input) {
    Var x = input;
    for (int l = 0; l < static_cast<int>(layers_.size()); ++l) x = mixture_forward(t, l, x);
    return x;
}

Var Supernet::data_loss(Tape& t, const Batch& batch) {
    batch.validate(sizes_.back());
    Var lg = logits(t, t.constant(batch.x));
    return t.softmax_cross_entropy(lg, batch.labels);
}

Var Supernet::complexity(Tape& t) {
    std::vector<double> wbits(cands_.weight_bits.begin(), cands_.weight_bits.end());
    std::vector<double> abits(cands_.act_bits.begin(), cands_.act_bits.end());
    Var acc = t.constant(Tensor::scalar(0.0));
    for (const auto& layer : layers_) {
        double comp = layer_comp(layer.dims);
        if (layer.fixed_bits) {
            double fixed = static_cast<double>(layer.fixed_bits->w_bits) *
                           layer.fixed_bits->a_bits * comp;
            acc = t.add(acc, t.constant(Tensor::scalar(fixed)));
            continue;
        }
        Var ew = t.dot_const(t.softmax_vec(t.param(arch_, layer.alpha)), wbits);
        Var ea = t.dot_const(t.softmax_vec(t.param(arch_, layer.beta)), abits);
        acc = t.add(acc, t.affine(t.mul(ew, ea), comp, 0.0));
    }
    return acc;
}

Var Supernet::arch_objective(Tape& t, const Batch& batch, double lambda) {
    require(lambda >= 0.0, "lambda must be nonnegative");
    Var l = data_loss(t, batch);
    return t.add_scaled(l, complexity(t), lambda);
}

namespace {

// First maximum wins, so ties resolve to the smaller candidate bitwidth.
int argmax_bits(std::span<const double> logits, const std::vector<int>& bits) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.size(); ++j)
        if (logits[j] > logits[best]) best = j;
    return bits[best];
}

}  // namespace

MpqPolicy Supernet::extract_policy(double budget) const {
    require(budget > 0.0, "budget must be positive");
    MpqPolicy policy;
    for (const auto& layer : layers_) {
        PolicyLayer pl;
        pl.name = layer.name;
        pl.comp = layer_comp(layer.dims);
        if (layer.fixed_bits) {
            pl.w_bits = layer.fixed_bits->w_bits;
            pl.a_bits = layer.fixed_bits->a_bits;
        } else {
            pl.w_bits = argmax_bits(arch_[layer.alpha].values(), cands_.weight_bits);
            pl.a_bits = argmax_bits(arch_[layer.beta].values(), cands_.act_bits);
        }
        policy.layers.push_back(std::move(pl));
    }
    policy.total_bops = MpqPolicy::bops(policy.layers);
    policy.budget = budget;
    policy.feasible = policy.total_bops <= budget;
    return policy;
}

double Supernet::max_bops() const {
    double total = 0.0;
    for (const auto& layer : layers_) {
        double comp = layer_comp(layer.dims);
        int w = layer.fixed_bits ? layer.fixed_bits->w_bits : cands_.weight_bits.back();
        int a = layer.fixed_bits ? layer.fixed_bits->a_bits : cands_.act_bits.back();
        total += static_cast<double>(w) * a * comp;
    }
    return total;
}

Tensor Supernet::logits_value(const Batch& batch) {
    Tape t;
    return t.value(logits(t, t.constant(batch.x)));
}

QuantizedMlp QuantizedMlp::from_policy(std::vector<int> layer_sizes, const MpqPolicy& policy,
                                       std::uint64_t init_seed) {
    require(layer_sizes.size() >= 2, "mlp needs at least input and output sizes");
    require(policy.layers.size() == layer_sizes.size() - 1,
            "policy has " + std::to_string(policy.layers.size()) + " layers but the model has " +
                std::to_string(layer_sizes.size() - 1));
    QuantizedMlp m = plain(std::move(layer_sizes), init_seed);
    for (std::size_t l = 0; l < policy.layers.size(); ++l) {
        QuantSpec::weights(policy.layers[l].w_bits).validate();
        QuantSpec::activations(policy.layers[l].a_bits).validate();
        m.bits_[l] = {policy.layers[l].w_bits, policy.layers[l].a_bits};
    }
    return m;
}

QuantizedMlp QuantizedMlp::plain(std::vector<int> layer_sizes, std::uint64_t init_seed) {
    require(layer_sizes.size() >= 2, "mlp needs at least input and output sizes");
    for (int s : layer_sizes) require(s >= 1, "layer sizes must be positive");
    QuantizedMlp m;
    m.sizes_ = std::move(layer_sizes);
    std::mt19937_64 rng(init_seed);
    const int n_layers = static_cast<int>(m.sizes_.size()) - 1;
    for (int l = 0; l < n_layers; ++l) {
        int fan_in = m.sizes_[static_cast<std::size_t>(l)];
        int fan_out = m.sizes_[static_cast<std::size_t>(l) + 1];
        m.weights_.add("layer" + std::to_string(l) + ".w",
                       random_normal(fan_in, fan_out, rng, std::sqrt(2.0 / fan_in)));
        m.bits_.emplace_back(0, 0);
    }
    return m;
}

Var QuantizedMlp::logits(Tape& t, Var input) {
    Var x = input;
    const int n_layers = static_cast<int>(bits_.size());
    for (int l = 0; l < n_layers; ++l) {
        Var w = t.param(weights_, l);
        auto [w_bits, a_bits] = bits_[static_cast<std::size_t>(l)];
        Var wq = w_bits > 0 ? t.fake_quant(w, QuantSpec::weights(w_bits)) : w;
        Var z = t.matmul(x, wq);
        if (l + 1 == n_layers) return z;
        Var act = t.relu(z);
        x = a_bits > 0 ? t.fake_quant(act, QuantSpec::activations(a_bits)) : act;
    }
    return x;
}

Var QuantizedMlp::loss(Tape& t, const Batch& batch) {
    batch.validate(sizes_.back());
    return t.softmax_cross_entropy(logits(t, t.constant(batch.x)), batch.labels);
}

Tensor QuantizedMlp::logits_value(const Batch& batch) {
    Tape t;
    return t.value(logits(t, t.constant(batch.x)));
}

double accuracy_from_logits(const Tensor& logits, std::span<const int> labels) {
    require(logits.rows() == static_cast<int>(labels.size()), "accuracy: row/label mismatch");
    int hits = 0;
    for (int r = 0; r < logits.rows(); ++r) {
        int best = 0;
        for (int c = 1; c < logits.cols(); ++c)
            if (logits(r, c) > logits(r, best)) best = c;
        if (best == labels[static_cast<std::size_t>(r)]) ++hits;
    }
    return static_cast<double>(hits) / logits.rows();
}

}  // namespace asga
