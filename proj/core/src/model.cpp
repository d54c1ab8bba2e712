#include "gattf/model.hpp"

#include "gattf/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gattf {

namespace {

constexpr Scalar kScaleFloor = Scalar(1e-6);

std::string layer_name(const char* stack, std::size_t i)
{
    return std::string(stack) + "." + std::to_string(i);
}

} // namespace

std::string to_string(HeadKind kind)
{
    return kind == HeadKind::student_t ? "student_t" : "gaussian";
}

HeadKind head_kind_from_string(const std::string& s)
{
    if (s == "student_t") {
        return HeadKind::student_t;
    }
    if (s == "gaussian") {
        return HeadKind::gaussian;
    }
    throw ValidationError("unknown distribution head '" + s + "'");
}

void ModelConfig::validate() const
{
    if (d_model == 0 || heads == 0 || d_model % heads != 0) {
        throw ValidationError("d_model " + std::to_string(d_model) + " must be a positive multiple of heads " +
                              std::to_string(heads));
    }
    if (encoder_layers == 0 || decoder_layers == 0 || ff_dim == 0 || context_length == 0 ||
        prediction_length == 0 || num_static == 0 || embedding_dim == 0) {
        throw ValidationError("model layer counts, widths and window lengths must be at least 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ValidationError("dropout must lie in [0, 1)");
    }
}

nlohmann::json ModelConfig::to_json() const
{
    return {{"d_model", d_model},
            {"encoder_layers", encoder_layers},
            {"decoder_layers", decoder_layers},
            {"heads", heads},
            {"ff_dim", ff_dim},
            {"context_length", context_length},
            {"prediction_length", prediction_length},
            {"dropout", dropout},
            {"head", to_string(head)},
            {"lags", lags},
            {"num_covariates", num_covariates},
            {"num_static", num_static},
            {"embedding_dim", embedding_dim}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j)
{
    ModelConfig c;
    c.d_model = j.value("d_model", c.d_model);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.heads = j.value("heads", c.heads);
    c.ff_dim = j.value("ff_dim", c.ff_dim);
    c.context_length = j.value("context_length", c.context_length);
    c.prediction_length = j.value("prediction_length", c.prediction_length);
    c.dropout = j.value("dropout", c.dropout);
    c.head = head_kind_from_string(j.value("head", to_string(c.head)));
    c.lags = j.value("lags", c.lags);
    c.num_covariates = j.value("num_covariates", c.num_covariates);
    c.num_static = j.value("num_static", c.num_static);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    return c;
}

ModelConfig with_features(ModelConfig config, const FeatureConfig& features)
{
    config.context_length = features.context_length;
    config.prediction_length = features.prediction_length;
    config.lags = features.lags;
    config.num_covariates = features.covariate_count();
    config.num_static = std::max<std::size_t>(1, features.sensors.size());
    return config;
}

std::size_t parameter_count(const ModelConfig& c)
{
    const std::size_t d = c.d_model, ff = c.ff_dim;
    const std::size_t in = c.feature_width() + c.embedding_dim;
    const std::size_t encoder_layer = 4 * d * d + 2 * d * ff + 9 * d + ff;
    const std::size_t decoder_layer = 8 * d * d + 2 * d * ff + 15 * d + ff;
    return c.num_static * c.embedding_dim + 2 * (in * d + d) + c.encoder_layers * encoder_layer +
           c.decoder_layers * decoder_layer + 4 * d + (d + 1) * c.head_width();
}

// --- parameters ---------------------------------------------------------------------

void ModelParams::add(std::string name, Tensor t)
{
    entries_.emplace_back(std::move(name), std::move(t));
}

namespace {

// Builds the named layout; `fill(shape, kind)` supplies values.
enum class InitKind { weight, bias, gain };

template <typename Fill>
void build_layout(const ModelConfig& c, Fill&& fill)
{
    const std::size_t d = c.d_model;
    const std::size_t in = c.feature_width() + c.embedding_dim;
    auto linear = [&](const std::string& p, std::size_t fan_in, std::size_t fan_out) {
        fill(p + ".weight", Shape{fan_in, fan_out}, InitKind::weight);
        fill(p + ".bias", Shape{fan_out}, InitKind::bias);
    };
    auto norm = [&](const std::string& p) {
        fill(p + ".gain", Shape{d}, InitKind::gain);
        fill(p + ".bias", Shape{d}, InitKind::bias);
    };
    auto attention = [&](const std::string& p) {
        for (const char* m : {".q", ".k", ".v", ".o"}) {
            linear(p + m, d, d);
        }
    };
    auto ffn = [&](const std::string& p) {
        linear(p + ".ff1", d, c.ff_dim);
        linear(p + ".ff2", c.ff_dim, d);
    };

    fill("static_embedding", Shape{c.num_static, c.embedding_dim}, InitKind::weight);
    linear("encoder.input", in, d);
    linear("decoder.input", in, d);
    for (std::size_t i = 0; i < c.encoder_layers; ++i) {
        const auto p = layer_name("encoder", i);
        norm(p + ".ln1");
        attention(p + ".self_attn");
        norm(p + ".ln2");
        ffn(p);
    }
    for (std::size_t i = 0; i < c.decoder_layers; ++i) {
        const auto p = layer_name("decoder", i);
        norm(p + ".ln1");
        attention(p + ".self_attn");
        norm(p + ".ln2");
        attention(p + ".cross_attn");
        norm(p + ".ln3");
        ffn(p);
    }
    norm("encoder.final_ln");
    norm("decoder.final_ln");
    linear("head", d, c.head_width());
}

} // namespace

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed)
{
    config.validate();
    ModelParams p;
    p.config_ = config;
    std::mt19937_64 rng(seed);
    build_layout(config, [&](std::string name, Shape shape, InitKind kind) {
        const std::size_t n = shape.size() == 2 ? shape[0] * shape[1] : shape[0];
        std::vector<Scalar> v(n, kind == InitKind::gain ? Scalar(1) : Scalar(0));
        if (kind == InitKind::weight) {
            const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
            std::uniform_real_distribution<double> u(-limit, limit);
            for (auto& x : v) {
                x = static_cast<Scalar>(u(rng));
            }
        }
        p.add(std::move(name), Tensor(std::move(shape), std::move(v), true));
    });
    return p;
}

ModelParams ModelParams::zeros(const ModelConfig& config)
{
    config.validate();
    ModelParams p;
    p.config_ = config;
    build_layout(config, [&](std::string name, Shape shape, InitKind) {
        p.add(std::move(name), Tensor::zeros(std::move(shape), true));
    });
    return p;
}

const Tensor& ModelParams::get(const std::string& name) const
{
    for (const auto& [n, t] : entries_) {
        if (n == name) {
            return t;
        }
    }
    throw ValidationError("model has no parameter '" + name + "'");
}

Tensor& ModelParams::get(const std::string& name)
{
    return const_cast<Tensor&>(std::as_const(*this).get(name));
}

bool ModelParams::contains(const std::string& name) const
{
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

std::size_t ModelParams::count() const
{
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) {
        n += t.numel();
    }
    return n;
}

void ModelParams::zero_grad()
{
    for (auto& [name, t] : entries_) {
        t.zero_grad();
    }
}

ModelParams ModelParams::clone() const
{
    ModelParams p;
    p.config_ = config_;
    for (const auto& [name, t] : entries_) {
        p.add(name, Tensor(t.shape(), std::vector<Scalar>(t.data().begin(), t.data().end()), true));
    }
    return p;
}

void ModelParams::assign(const ModelParams& other)
{
    if (other.entries_.size() != entries_.size()) {
        throw ShapeError("parameter sets differ in size");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        auto& dst = entries_[i].second;
        const auto& src = other.entries_[i].second;
        if (entries_[i].first != other.entries_[i].first || dst.shape() != src.shape()) {
            throw ShapeError("parameter '" + entries_[i].first + "' does not match '" + other.entries_[i].first +
                             "'");
        }
        std::copy(src.data().begin(), src.data().end(), dst.data().begin());
    }
}

// --- inputs -------------------------------------------------------------------------

std::vector<Scalar> encoder_features(const TrainingInstance& inst)
{
    const std::size_t C = inst.context_length, L = inst.num_lags, K = inst.num_covariates;
    const std::size_t F = 1 + L + kTimeFeatureCount + 2 * K;
    const double s = inst.scale;
    std::vector<Scalar> x(C * F, Scalar(0));
    for (std::size_t p = 0; p < C; ++p) {
        Scalar* row = &x[p * F];
        row[0] = inst.observed_context[p] ? static_cast<Scalar>(inst.target_context[p] / s) : Scalar(0);
        for (std::size_t k = 0; k < L; ++k) {
            row[1 + k] = inst.lag_observed[p * L + k] ? static_cast<Scalar>(inst.lag_features[p * L + k] / s) : Scalar(0);
        }
        for (std::size_t f = 0; f < kTimeFeatureCount; ++f) {
            row[1 + L + f] = static_cast<Scalar>(inst.time_features[p * kTimeFeatureCount + f]);
        }
        for (std::size_t c = 0; c < K; ++c) {
            const bool on = inst.covariate_indicator[p * K + c] != 0;
            row[1 + L + kTimeFeatureCount + c] = on ? static_cast<Scalar>(inst.covariate_channels[p * K + c] / s) : Scalar(0);
            row[1 + L + kTimeFeatureCount + K + c] = on ? Scalar(1) : Scalar(0);
        }
    }
    return x;
}

namespace {

// One decoder input row. `prev(i)` yields the scaled value at future index i
// (0 when unknown); the remaining columns come from the instance.
template <typename Prev>
void fill_decoder_row(Scalar* row, const TrainingInstance& inst, const std::vector<std::size_t>& lags, std::size_t j,
                      Prev prev)
{
    const std::size_t C = inst.context_length, L = inst.num_lags, K = inst.num_covariates;
    const double s = inst.scale;
    const std::size_t p = C + j;
    if (j == 0) {
        row[0] = inst.observed_context[C - 1] ? static_cast<Scalar>(inst.target_context[C - 1] / s) : Scalar(0);
    } else {
        row[0] = prev(j - 1);
    }
    for (std::size_t k = 0; k < L; ++k) {
        const std::size_t l = lags[k];
        if (l <= j) {
            row[1 + k] = prev(j - l);
        } else {
            row[1 + k] = inst.lag_observed[p * L + k] ? static_cast<Scalar>(inst.lag_features[p * L + k] / s) : Scalar(0);
        }
    }
    for (std::size_t f = 0; f < kTimeFeatureCount; ++f) {
        row[1 + L + f] = static_cast<Scalar>(inst.time_features[p * kTimeFeatureCount + f]);
    }
    for (std::size_t c = 0; c < K; ++c) {
        const bool on = inst.covariate_indicator[p * K + c] != 0;
        row[1 + L + kTimeFeatureCount + c] = on ? static_cast<Scalar>(inst.covariate_channels[p * K + c] / s) : Scalar(0);
        row[1 + L + kTimeFeatureCount + K + c] = on ? Scalar(1) : Scalar(0);
    }
}

void check_instance(const ModelConfig& c, const TrainingInstance& inst)
{
    if (inst.context_length != c.context_length || inst.prediction_length != c.prediction_length ||
        inst.num_lags != c.lags.size() || inst.num_covariates != c.num_covariates) {
        throw ShapeError("instance (context " + std::to_string(inst.context_length) + ", prediction " +
                         std::to_string(inst.prediction_length) + ", lags " + std::to_string(inst.num_lags) +
                         ", covariates " + std::to_string(inst.num_covariates) + ") does not match the model (" +
                         std::to_string(c.context_length) + ", " + std::to_string(c.prediction_length) + ", " +
                         std::to_string(c.lags.size()) + ", " + std::to_string(c.num_covariates) + ")");
    }
    if (inst.static_id >= c.num_static) {
        throw RangeError("static id " + std::to_string(inst.static_id) + " outside the embedding table");
    }
}

} // namespace

std::vector<Scalar> decoder_features(const TrainingInstance& inst, const std::vector<std::size_t>& lags)
{
    const std::size_t P = inst.prediction_length;
    const std::size_t F = 1 + inst.num_lags + kTimeFeatureCount + 2 * inst.num_covariates;
    if (lags.size() != inst.num_lags) {
        throw ShapeError("decoder features: " + std::to_string(lags.size()) + " lags for an instance with " +
                         std::to_string(inst.num_lags));
    }
    std::vector<Scalar> x(P * F, Scalar(0));
    auto prev = [&](std::size_t i) {
        return inst.observed_future[i] ? static_cast<Scalar>(inst.target_future[i] / inst.scale) : Scalar(0);
    };
    for (std::size_t j = 0; j < P; ++j) {
        fill_decoder_row(&x[j * F], inst, lags, j, prev);
    }
    return x;
}

// --- network ------------------------------------------------------------------------

namespace {

Tensor linear(const ModelParams& p, const std::string& prefix, const Tensor& x)
{
    return add(matmul(x, p.get(prefix + ".weight")), p.get(prefix + ".bias"));
}

Tensor norm(const ModelParams& p, const std::string& prefix, const Tensor& x)
{
    return layer_norm(x, p.get(prefix + ".gain"), p.get(prefix + ".bias"));
}

Tensor maybe_dropout(const ModelParams& p, const Tensor& x, DropoutRng rng)
{
    if (rng == nullptr || p.config().dropout <= 0.0) {
        return x;
    }
    return dropout(x, static_cast<Scalar>(p.config().dropout), *rng);
}

Tensor feed_forward(const ModelParams& p, const std::string& prefix, const Tensor& x)
{
    return linear(p, prefix + ".ff2", gelu(linear(p, prefix + ".ff1", x)));
}

Tensor attention_block(const ModelParams& p, const std::string& prefix, const Tensor& xq, const Tensor& xkv,
                       bool causal)
{
    const Tensor q = linear(p, prefix + ".q", xq);
    const Tensor k = linear(p, prefix + ".k", xkv);
    const Tensor v = linear(p, prefix + ".v", xkv);
    return linear(p, prefix + ".o", multi_head_attention(q, k, v, p.config().heads, causal));
}

Tensor project_input(const ModelParams& p, const char* which, std::vector<Scalar> rows, std::size_t n,
                     std::size_t static_id)
{
    const std::size_t F = p.config().feature_width();
    if (rows.size() != n * F) {
        throw ShapeError(std::string(which) + " input has " + std::to_string(rows.size()) + " values, expected " +
                         std::to_string(n) + " x " + std::to_string(F));
    }
    const Tensor x(Shape{n, F}, std::move(rows));
    const std::size_t id[1] = {static_id};
    const Tensor e = broadcast_rows(embed(p.get("static_embedding"), id), n);
    return linear(p, std::string(which) + ".input", concat({x, e}, 1));
}

// Maps raw head outputs [n, w] to distribution parameters.
Tensor head_transform(const ModelConfig& c, const Tensor& raw)
{
    if (c.head == HeadKind::student_t) {
        const Tensor df = add_scalar(softplus(slice(raw, 1, 0, 1)), Scalar(2));
        const Tensor loc = slice(raw, 1, 1, 2);
        const Tensor sc = add_scalar(softplus(slice(raw, 1, 2, 3)), kScaleFloor);
        return concat({df, loc, sc}, 1);
    }
    const Tensor loc = slice(raw, 1, 0, 1);
    const Tensor sc = add_scalar(softplus(slice(raw, 1, 1, 2)), kScaleFloor);
    return concat({loc, sc}, 1);
}

} // namespace

Tensor encode(const ModelParams& params, const TrainingInstance& inst, DropoutRng rng)
{
    const ModelConfig& c = params.config();
    check_instance(c, inst);
    Tensor h = project_input(params, "encoder", encoder_features(inst), inst.context_length, inst.static_id);
    for (std::size_t i = 0; i < c.encoder_layers; ++i) {
        const auto p = layer_name("encoder", i);
        const Tensor a = norm(params, p + ".ln1", h);
        h = add(h, maybe_dropout(params, attention_block(params, p + ".self_attn", a, a, false), rng));
        h = add(h, maybe_dropout(params, feed_forward(params, p, norm(params, p + ".ln2", h)), rng));
    }
    return norm(params, "encoder.final_ln", h);
}

Tensor decode_rows(const ModelParams& params, const Tensor& memory, std::span<const Scalar> decoder_rows,
                   std::size_t static_id, DropoutRng rng)
{
    const ModelConfig& c = params.config();
    const std::size_t F = c.feature_width();
    if (decoder_rows.empty() || decoder_rows.size() % F != 0) {
        throw ShapeError("decoder rows: " + std::to_string(decoder_rows.size()) + " values for width " +
                         std::to_string(F));
    }
    const std::size_t n = decoder_rows.size() / F;
    Tensor h = project_input(params, "decoder", std::vector<Scalar>(decoder_rows.begin(), decoder_rows.end()), n,
                             static_id);
    for (std::size_t i = 0; i < c.decoder_layers; ++i) {
        const auto p = layer_name("decoder", i);
        const Tensor a = norm(params, p + ".ln1", h);
        h = add(h, maybe_dropout(params, attention_block(params, p + ".self_attn", a, a, true), rng));
        h = add(h, maybe_dropout(params, attention_block(params, p + ".cross_attn", norm(params, p + ".ln2", h), memory,
                                                         false),
                                 rng));
        h = add(h, maybe_dropout(params, feed_forward(params, p, norm(params, p + ".ln3", h)), rng));
    }
    h = norm(params, "decoder.final_ln", h);
    return head_transform(c, linear(params, "head", h));
}

Tensor decode_teacher_forced(const ModelParams& params, const Tensor& memory, const TrainingInstance& inst,
                             DropoutRng rng)
{
    check_instance(params.config(), inst);
    return decode_rows(params, memory, decoder_features(inst, params.config().lags), inst.static_id, rng);
}

Tensor nll_loss(const ModelConfig& config, const Tensor& dist_params, const TrainingInstance& inst)
{
    const std::size_t P = inst.prediction_length;
    if (dist_params.rank() != 2 || dist_params.rows() != P || dist_params.cols() != config.head_width()) {
        throw ShapeError("nll_loss: parameters " + shape_string(dist_params.shape()) + " for horizon " +
                         std::to_string(P));
    }
    std::vector<Scalar> y(P);
    for (std::size_t j = 0; j < P; ++j) {
        y[j] = inst.observed_future[j] ? static_cast<Scalar>(inst.target_future[j] / inst.scale) : Scalar(0);
    }
    if (config.head == HeadKind::student_t) {
        return student_t_nll(slice(dist_params, 1, 0, 1), slice(dist_params, 1, 1, 2), slice(dist_params, 1, 2, 3), y,
                             inst.observed_future);
    }
    return gaussian_nll(slice(dist_params, 1, 0, 1), slice(dist_params, 1, 1, 2), y, inst.observed_future);
}

Tensor instance_loss(const ModelParams& params, const TrainingInstance& inst, DropoutRng rng)
{
    const Tensor memory = encode(params, inst, rng);
    return nll_loss(params.config(), decode_teacher_forced(params, memory, inst, rng), inst);
}

// --- inference ----------------------------------------------------------------------

std::vector<double> ForecastDistribution::quantile(double q) const
{
    std::vector<double> out(horizon);
    std::vector<double> col(num_samples);
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t s = 0; s < num_samples; ++s) {
            col[s] = sample(s, t);
        }
        std::sort(col.begin(), col.end());
        const double pos = q * static_cast<double>(num_samples - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, num_samples - 1);
        out[t] = col[lo] + (pos - static_cast<double>(lo)) * (col[hi] - col[lo]);
    }
    return out;
}

std::vector<double> ForecastDistribution::median() const
{
    return quantile(0.5);
}

namespace {

// Cached decoder for S trajectories advancing one step at a time.
class IncrementalDecoder {
public:
    IncrementalDecoder(const ModelParams& params, const Tensor& memory, std::size_t trajectories, std::size_t static_id)
        : p_(params), c_(params.config()), s_(trajectories), static_id_(static_id)
    {
        const std::size_t d = c_.d_model;
        for (std::size_t i = 0; i < c_.decoder_layers; ++i) {
            const auto p = layer_name("decoder", i);
            mem_k_.push_back(linear(p_, p + ".cross_attn.k", memory));
            mem_v_.push_back(linear(p_, p + ".cross_attn.v", memory));
            k_cache_.emplace_back(s_ * c_.prediction_length * d, Scalar(0));
            v_cache_.emplace_back(s_ * c_.prediction_length * d, Scalar(0));
        }
    }

    /// rows: [S, F] inputs for step `step_`. Returns distribution params [S, w].
    Tensor step(std::vector<Scalar> rows)
    {
        const std::size_t d = c_.d_model;
        const std::size_t P = c_.prediction_length;
        if (step_ >= P) {
            throw RangeError("incremental decoder advanced past the horizon");
        }
        Tensor h = project_input(p_, "decoder", std::move(rows), s_, static_id_);
        for (std::size_t i = 0; i < c_.decoder_layers; ++i) {
            const auto p = layer_name("decoder", i);
            const Tensor a = norm(p_, p + ".ln1", h);
            const Tensor q = linear(p_, p + ".self_attn.q", a);
            const Tensor k = linear(p_, p + ".self_attn.k", a);
            const Tensor v = linear(p_, p + ".self_attn.v", a);
            auto& kc = k_cache_[i];
            auto& vc = v_cache_[i];
            for (std::size_t s = 0; s < s_; ++s) {
                std::copy_n(k.data().begin() + static_cast<std::ptrdiff_t>(s * d), d,
                            kc.begin() + static_cast<std::ptrdiff_t>((s * P + step_) * d));
                std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(s * d), d,
                            vc.begin() + static_cast<std::ptrdiff_t>((s * P + step_) * d));
            }
            std::vector<Scalar> att(s_ * d, Scalar(0));
            for (std::size_t s = 0; s < s_; ++s) {
                single_query(&q.data()[s * d], &kc[s * P * d], &vc[s * P * d], step_ + 1, &att[s * d]);
            }
            h = add(h, linear(p_, p + ".self_attn.o", Tensor(Shape{s_, d}, std::move(att))));
            const Tensor b = norm(p_, p + ".ln2", h);
            const Tensor cq = linear(p_, p + ".cross_attn.q", b);
            h = add(h, linear(p_, p + ".cross_attn.o", multi_head_attention(cq, mem_k_[i], mem_v_[i], c_.heads, false)));
            h = add(h, feed_forward(p_, p, norm(p_, p + ".ln3", h)));
        }
        h = norm(p_, "decoder.final_ln", h);
        ++step_;
        return head_transform(c_, linear(p_, "head", h));
    }

private:
    void single_query(const Scalar* q, const Scalar* k, const Scalar* v, std::size_t n, Scalar* out) const
    {
        const std::size_t d = c_.d_model;
        const std::size_t dh = d / c_.heads;
        const Scalar inv = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
        std::vector<Scalar> w(n);
        for (std::size_t h = 0; h < c_.heads; ++h) {
            const std::size_t o = h * dh;
            Scalar m = -std::numeric_limits<Scalar>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                Scalar dot = 0;
                for (std::size_t t = 0; t < dh; ++t) {
                    dot += q[o + t] * k[j * d + o + t];
                }
                w[j] = dot * inv;
                m = std::max(m, w[j]);
            }
            Scalar total = 0;
            for (std::size_t j = 0; j < n; ++j) {
                w[j] = std::exp(w[j] - m);
                total += w[j];
            }
            for (std::size_t j = 0; j < n; ++j) {
                const Scalar pj = w[j] / total;
                for (std::size_t t = 0; t < dh; ++t) {
                    out[o + t] += pj * v[j * d + o + t];
                }
            }
        }
    }

    const ModelParams& p_;
    const ModelConfig& c_;
    std::size_t s_;
    std::size_t static_id_;
    std::size_t step_ = 0;
    std::vector<Tensor> mem_k_, mem_v_;
    std::vector<std::vector<Scalar>> k_cache_, v_cache_;
};

} // namespace

ForecastDistribution sample_forecast(const ModelParams& params, const TrainingInstance& inst,
                                     std::size_t num_samples, std::uint64_t seed)
{
    const ModelConfig& c = params.config();
    check_instance(c, inst);
    if (num_samples == 0) {
        throw ValidationError("num_samples must be at least 1");
    }
    NoGradGuard no_grad;
    const std::size_t P = c.prediction_length;
    const std::size_t F = c.feature_width();
    const Tensor memory = encode(params, inst);
    IncrementalDecoder dec(params, memory, num_samples, inst.static_id);

    std::vector<std::mt19937_64> rngs;
    rngs.reserve(num_samples);
    for (std::size_t s = 0; s < num_samples; ++s) {
        rngs.emplace_back(seed + s);
    }
    std::vector<Scalar> scaled(num_samples * P, Scalar(0));
    for (std::size_t j = 0; j < P; ++j) {
        std::vector<Scalar> rows(num_samples * F, Scalar(0));
        for (std::size_t s = 0; s < num_samples; ++s) {
            fill_decoder_row(&rows[s * F], inst, c.lags, j, [&](std::size_t i) { return scaled[s * P + i]; });
        }
        const Tensor dist = dec.step(std::move(rows));
        for (std::size_t s = 0; s < num_samples; ++s) {
            double y = 0.0;
            if (c.head == HeadKind::student_t) {
                const double df = dist.at(s, 0), loc = dist.at(s, 1), sc = dist.at(s, 2);
                y = loc + sc * std::student_t_distribution<double>(df)(rngs[s]);
            } else {
                y = dist.at(s, 0) + dist.at(s, 1) * std::normal_distribution<double>(0.0, 1.0)(rngs[s]);
            }
            scaled[s * P + j] = static_cast<Scalar>(y);
        }
    }
    ForecastDistribution out;
    out.num_samples = num_samples;
    out.horizon = P;
    out.scale = inst.scale;
    out.samples.resize(num_samples * P);
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        out.samples[i] = static_cast<double>(scaled[i]) * inst.scale;
    }
    return out;
}

Tensor decode_incremental(const ModelParams& params, const Tensor& memory, std::span<const Scalar> decoder_rows,
                          std::size_t static_id)
{
    NoGradGuard no_grad;
    const ModelConfig& c = params.config();
    const std::size_t F = c.feature_width();
    const std::size_t n = decoder_rows.size() / F;
    IncrementalDecoder dec(params, memory, 1, static_id);
    std::vector<Tensor> out;
    for (std::size_t j = 0; j < n; ++j) {
        out.push_back(dec.step(std::vector<Scalar>(decoder_rows.begin() + static_cast<std::ptrdiff_t>(j * F),
                                                   decoder_rows.begin() + static_cast<std::ptrdiff_t>((j + 1) * F))));
    }
    return concat(out, 0);
}

} // namespace gattf
