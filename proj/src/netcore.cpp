#include "robnas/netcore.hpp"

#include "cell_network_impl.hpp"
#include "robnas/error.hpp"
#include "robnas/loss.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace robnas::netcore {

double Activation::operator()(double z) const {
    switch (kind) {
        case ActivationKind::relu: return z > 0 ? z : 0.0;
        case ActivationKind::leaky_relu: return z > 0 ? z : slope * z;
        case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case ActivationKind::erf: return std::erf(z);
        case ActivationKind::identity: return z;
    }
    return 0.0;
}

double Activation::derivative(double z) const {
    switch (kind) {
        case ActivationKind::relu: return z > 0 ? 1.0 : 0.0;
        case ActivationKind::leaky_relu: return z > 0 ? 1.0 : slope;
        case ActivationKind::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case ActivationKind::erf: return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-z * z);
        case ActivationKind::identity: return 1.0;
    }
    return 0.0;
}

std::string Activation::name() const {
    switch (kind) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::leaky_relu: return "leaky_relu";
        case ActivationKind::sigmoid: return "sigmoid";
        case ActivationKind::erf: return "erf";
        case ActivationKind::identity: return "identity";
    }
    return "?";
}

Activation Activation::parse(const std::string& text) {
    if (text == "relu") return {ActivationKind::relu};
    if (text == "leaky_relu") return {ActivationKind::leaky_relu};
    if (text == "sigmoid") return {ActivationKind::sigmoid};
    if (text == "erf") return {ActivationKind::erf};
    if (text == "identity") return {ActivationKind::identity};
    fail(ErrorKind::validation, "unknown activation: " + text);
}

std::string family_name(Family f) {
    switch (f) {
        case Family::linear: return "linear";
        case Family::residual_fcnn: return "residual_fcnn";
        case Family::residual_cnn: return "residual_cnn";
        case Family::cell_network: return "cell_network";
    }
    return "?";
}

Family parse_family(const std::string& text) {
    if (text == "linear") return Family::linear;
    if (text == "residual_fcnn") return Family::residual_fcnn;
    if (text == "residual_cnn") return Family::residual_cnn;
    if (text == "cell_network") return Family::cell_network;
    fail(ErrorKind::validation, "unknown network family: " + text);
}

void NetworkSpec::validate() const {
    auto bad = [](const std::string& why) { fail(ErrorKind::validation, "invalid network spec: " + why); };
    if (input_dim < 1) bad("input_dim must be >= 1");
    switch (family) {
        case Family::linear: return;
        case Family::residual_fcnn:
        case Family::residual_cnn:
            if (depth < 2) bad("depth must be >= 2");
            if (width < 1) bad("width must be >= 1");
            if (!activations.empty() && static_cast<int>(activations.size()) != depth - 1)
                bad("expected " + std::to_string(depth - 1) + " activations");
            if (!skip_flags.empty() && static_cast<int>(skip_flags.size()) != std::max(depth - 2, 0))
                bad("expected " + std::to_string(depth - 2) + " skip flags");
            for (int a : skip_flags)
                if (a != 0 && a != 1) bad("skip flags must be 0 or 1");
            if (family == Family::residual_cnn) {
                if (pixels < 1) bad("pixels must be >= 1");
                if (filter_size < 1 || filter_size % 2 == 0) bad("filter_size must be odd");
            }
            return;
        case Family::cell_network:
            if (cell_count < 1) bad("cell_count must be >= 1");
            if (stem_channels < 1 || in_channels < 1 || image_size < 1) bad("channel/image sizes must be >= 1");
            if (num_classes < 2) bad("num_classes must be >= 2");
            return;
    }
}

Activation NetworkSpec::activation(int layer) const {
    if (activations.empty()) return {};
    return activations.at(static_cast<std::size_t>(layer - 1));
}

int NetworkSpec::skip(int layer) const {
    if (skip_flags.empty()) return 0;
    return skip_flags.at(static_cast<std::size_t>(layer - 1));
}

double NetworkSpec::branch_scale() const { return unscaled_branches ? 1.0 : 1.0 / depth; }

std::size_t NetworkSpec::input_size() const {
    switch (family) {
        case Family::linear:
        case Family::residual_fcnn: return static_cast<std::size_t>(input_dim);
        case Family::residual_cnn: return static_cast<std::size_t>(input_dim) * pixels;
        case Family::cell_network: return static_cast<std::size_t>(in_channels) * image_size * image_size;
    }
    return 0;
}

std::size_t NetworkSpec::output_size() const {
    return family == Family::cell_network ? static_cast<std::size_t>(num_classes) : 1;
}

bool is_binary(const NetworkSpec& spec) { return spec.family != Family::cell_network; }

std::vector<LayerShape> layer_shapes(const NetworkSpec& spec) {
    spec.validate();
    const Eigen::Index m = spec.width;
    const Eigen::Index d = spec.input_dim;
    std::vector<LayerShape> shapes;
    switch (spec.family) {
        case Family::linear: shapes.push_back({1, d}); break;
        case Family::residual_fcnn:
            shapes.push_back({m, d});
            for (int l = 2; l <= spec.depth - 1; ++l) shapes.push_back({m, m});
            shapes.push_back({1, m});
            break;
        case Family::residual_cnn: {
            const Eigen::Index k = spec.filter_size;
            shapes.push_back({m, k * d});
            for (int l = 2; l <= spec.depth - 1; ++l) shapes.push_back({m, k * m});
            shapes.push_back({m, spec.pixels});
            break;
        }
        case Family::cell_network: shapes = detail::cell_layer_shapes(spec); break;
    }
    return shapes;
}

std::size_t WeightSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.size());
    return n;
}

Vec WeightSet::flatten() const {
    Vec flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index offset = 0;
    for (const auto& l : layers) {
        flat.segment(offset, l.size()) = Eigen::Map<const Vec>(l.data(), l.size());
        offset += l.size();
    }
    return flat;
}

WeightSet WeightSet::with_flat(const Vec& flat) const {
    if (static_cast<std::size_t>(flat.size()) != parameter_count())
        fail(ErrorKind::validation, "flat weight vector has wrong length");
    WeightSet out{layers, seed};
    Eigen::Index offset = 0;
    for (auto& l : out.layers) {
        Eigen::Map<Vec>(l.data(), l.size()) = flat.segment(offset, l.size());
        offset += l.size();
    }
    return out;
}

bool WeightSet::operator==(const WeightSet& other) const {
    if (seed != other.seed || layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].rows() != other.layers[i].rows() || layers[i].cols() != other.layers[i].cols()) return false;
        if (layers[i] != other.layers[i]) return false;
    }
    return true;
}

WeightSet init_weights(const NetworkSpec& spec, std::uint64_t seed) {
    const auto shapes = layer_shapes(spec);
    Rng rng = make_rng(seed, "netcore.init");
    WeightSet w;
    w.seed = seed;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        Mat layer(shapes[i].rows, shapes[i].cols);
        double variance = 0.0;
        switch (spec.family) {
            case Family::linear: variance = 1.0 / spec.input_dim; break;
            case Family::residual_fcnn:
            case Family::residual_cnn: variance = 1.0 / spec.width; break;
            case Family::cell_network: variance = detail::cell_init_variance(spec, i, shapes[i]); break;
        }
        if (variance == 0.0) {
            layer.setZero();
        } else {
            std::normal_distribution<double> normal(0.0, std::sqrt(variance));
            for (Eigen::Index k = 0; k < layer.size(); ++k) layer.data()[k] = normal(rng);
        }
        w.layers.push_back(std::move(layer));
    }
    return w;
}

void check_weights(const NetworkSpec& spec, const WeightSet& weights) {
    const auto shapes = layer_shapes(spec);
    if (weights.layers.size() != shapes.size())
        fail(ErrorKind::validation, "weight set has " + std::to_string(weights.layers.size()) + " layers, spec needs " +
                                        std::to_string(shapes.size()));
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto& l = weights.layers[i];
        if (l.rows() != shapes[i].rows || l.cols() != shapes[i].cols)
            fail(ErrorKind::validation, "shape mismatch at layer " + std::to_string(i + 1) + ": got " +
                                            std::to_string(l.rows()) + "x" + std::to_string(l.cols()) + ", expected " +
                                            std::to_string(shapes[i].rows) + "x" + std::to_string(shapes[i].cols));
    }
}

namespace {

void check_input(const NetworkSpec& spec, const Vec& x) {
    if (static_cast<std::size_t>(x.size()) != spec.input_size())
        fail(ErrorKind::validation, "input has size " + std::to_string(x.size()) + ", expected " +
                                        std::to_string(spec.input_size()));
}

Vec apply(const Activation& act, const Vec& z) { return z.unaryExpr([&](double v) { return act(v); }); }
Vec apply_derivative(const Activation& act, const Vec& z) {
    return z.unaryExpr([&](double v) { return act.derivative(v); });
}
Mat apply(const Activation& act, const Mat& z) { return z.unaryExpr([&](double v) { return act(v); }); }
Mat apply_derivative(const Activation& act, const Mat& z) {
    return z.unaryExpr([&](double v) { return act.derivative(v); });
}

Eigen::Map<const Mat> as_grid(const Vec& x, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Mat>(x.data(), rows, cols);
}

struct FcnnCache {
    FcnnTrace trace;
    std::vector<Vec> pre;  // pre-activations h_1 .. h_{L-1}
};

FcnnCache run_fcnn(const NetworkSpec& spec, const WeightSet& w, const Vec& x) {
    FcnnCache c;
    const int L = spec.depth;
    const double s = spec.branch_scale();
    Vec h = w.layers[0] * x;
    c.trace.features.push_back(apply(spec.activation(1), h));
    c.pre.push_back(std::move(h));
    for (int l = 2; l <= L - 1; ++l) {
        const Vec& prev = c.trace.features.back();
        Vec hl = w.layers[static_cast<std::size_t>(l - 1)] * prev;
        Vec fl = s * apply(spec.activation(l), hl);
        if (spec.skip(l - 1)) fl += prev;
        c.pre.push_back(std::move(hl));
        c.trace.features.push_back(std::move(fl));
    }
    c.trace.output = spec.output_scale * w.layers.back().row(0).dot(c.trace.features.back());
    return c;
}

struct CnnCache {
    CnnTrace trace;
    std::vector<Mat> pre;
    std::vector<Mat> patches;  // patches of the input to each conv layer
};

CnnCache run_cnn(const NetworkSpec& spec, const WeightSet& w, const Vec& x) {
    CnnCache c;
    const int L = spec.depth;
    const double s = spec.branch_scale();
    const int k = spec.filter_size;
    c.patches.push_back(extract_patches(as_grid(x, spec.input_dim, spec.pixels), k));
    Mat h = w.layers[0] * c.patches.back();
    c.trace.features.push_back(apply(spec.activation(1), h));
    c.pre.push_back(std::move(h));
    for (int l = 2; l <= L - 1; ++l) {
        const Mat& prev = c.trace.features.back();
        c.patches.push_back(extract_patches(prev, k));
        Mat hl = w.layers[static_cast<std::size_t>(l - 1)] * c.patches.back();
        Mat fl = s * apply(spec.activation(l), hl);
        if (spec.skip(l - 1)) fl += prev;
        c.pre.push_back(std::move(hl));
        c.trace.features.push_back(std::move(fl));
    }
    c.trace.output = spec.output_scale * w.layers.back().cwiseProduct(c.trace.features.back()).sum();
    return c;
}

}  // namespace

FcnnTrace forward_fcnn(const NetworkSpec& spec, const WeightSet& weights, const Vec& x) {
    if (spec.family != Family::residual_fcnn) fail(ErrorKind::validation, "forward_fcnn needs a residual_fcnn spec");
    check_weights(spec, weights);
    check_input(spec, x);
    return run_fcnn(spec, weights, x).trace;
}

Mat extract_patches(const Mat& x, int filter_size) {
    if (filter_size < 1 || filter_size % 2 == 0) fail(ErrorKind::validation, "filter size must be odd");
    const Eigen::Index d = x.rows();
    const Eigen::Index p = x.cols();
    const int half = (filter_size - 1) / 2;
    Mat out = Mat::Zero(filter_size * d, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (int u = 0; u < filter_size; ++u) {
            const Eigen::Index src = j + u - half;
            if (src < 0 || src >= p) continue;
            out.block(u * d, j, d, 1) = x.col(src);
        }
    }
    return out;
}

Mat accumulate_patches(const Mat& patches, int filter_size, Eigen::Index channels) {
    const Eigen::Index p = patches.cols();
    const int half = (filter_size - 1) / 2;
    Mat out = Mat::Zero(channels, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (int u = 0; u < filter_size; ++u) {
            const Eigen::Index dst = j + u - half;
            if (dst < 0 || dst >= p) continue;
            out.col(dst) += patches.block(u * channels, j, channels, 1);
        }
    }
    return out;
}

CnnTrace forward_cnn(const NetworkSpec& spec, const WeightSet& weights, const Vec& x) {
    if (spec.family != Family::residual_cnn) fail(ErrorKind::validation, "forward_cnn needs a residual_cnn spec");
    check_weights(spec, weights);
    check_input(spec, x);
    return run_cnn(spec, weights, x).trace;
}

double forward_cnn_direct(const NetworkSpec& spec, const WeightSet& weights, const Vec& x) {
    if (spec.family != Family::residual_cnn) fail(ErrorKind::validation, "forward_cnn_direct needs a residual_cnn spec");
    check_weights(spec, weights);
    check_input(spec, x);
    const int k = spec.filter_size;
    const Eigen::Index p = spec.pixels;
    const double s = spec.branch_scale();
    // (W * X)(i, j) = sum_u sum_v W(u, i, v) X(v, j + u - (k+1)/2), 1-based u and j.
    auto conv = [&](const Mat& kernel, const Mat& in) {
        const Eigen::Index channels = in.rows();
        Mat out = Mat::Zero(kernel.rows(), p);
        for (Eigen::Index i = 0; i < kernel.rows(); ++i) {
            for (Eigen::Index j = 1; j <= p; ++j) {
                double acc = 0.0;
                for (int u = 1; u <= k; ++u) {
                    const Eigen::Index col = j + u - (k + 1) / 2;
                    if (col < 1 || col > p) continue;
                    for (Eigen::Index v = 1; v <= channels; ++v)
                        acc += kernel(i, (u - 1) * channels + (v - 1)) * in(v - 1, col - 1);
                }
                out(i, j - 1) = acc;
            }
        }
        return out;
    };
    Mat f = apply(spec.activation(1), conv(weights.layers[0], as_grid(x, spec.input_dim, p)));
    for (int l = 2; l <= spec.depth - 1; ++l) {
        Mat next = s * apply(spec.activation(l), conv(weights.layers[static_cast<std::size_t>(l - 1)], f));
        if (spec.skip(l - 1)) next += f;
        f = std::move(next);
    }
    double out = 0.0;
    for (Eigen::Index i = 0; i < f.rows(); ++i)
        for (Eigen::Index j = 0; j < f.cols(); ++j) out += weights.layers.back()(i, j) * f(i, j);
    return spec.output_scale * out;
}

Vec forward_cell_network(const NetworkSpec& spec, const WeightSet& weights, const Vec& x) {
    if (spec.family != Family::cell_network) fail(ErrorKind::validation, "forward_cell_network needs a cell_network spec");
    check_weights(spec, weights);
    check_input(spec, x);
    return detail::cell_forward(spec, weights, x);
}

Vec outputs(const NetworkSpec& spec, const WeightSet& weights, const Vec& x) {
    switch (spec.family) {
        case Family::linear: {
            check_weights(spec, weights);
            check_input(spec, x);
            Vec out(1);
            out(0) = spec.output_scale * weights.layers[0].row(0).dot(x);
            return out;
        }
        case Family::residual_fcnn: return Vec::Constant(1, forward_fcnn(spec, weights, x).output);
        case Family::residual_cnn: return Vec::Constant(1, forward_cnn(spec, weights, x).output);
        case Family::cell_network: return forward_cell_network(spec, weights, x);
    }
    return {};
}

double scalar_output(const NetworkSpec& spec, const WeightSet& weights, const Vec& x) {
    return outputs(spec, weights, x).sum();
}

Backprop backprop(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, const Vec& dout) {
    check_weights(spec, weights);
    check_input(spec, x);
    if (static_cast<std::size_t>(dout.size()) != spec.output_size())
        fail(ErrorKind::validation, "upstream gradient has wrong size");
    Backprop out;
    out.weight_grad = Vec::Zero(static_cast<Eigen::Index>(weights.parameter_count()));
    std::vector<Eigen::Index> offsets;
    {
        Eigen::Index o = 0;
        for (const auto& l : weights.layers) {
            offsets.push_back(o);
            o += l.size();
        }
    }
    auto grad_block = [&](std::size_t layer) {
        const auto& l = weights.layers[layer];
        return Eigen::Map<Mat>(out.weight_grad.data() + offsets[layer], l.rows(), l.cols());
    };

    switch (spec.family) {
        case Family::linear: {
            const double g = spec.output_scale * dout(0);
            out.outputs = Vec::Constant(1, spec.output_scale * weights.layers[0].row(0).dot(x));
            grad_block(0) = g * x.transpose();
            out.input_grad = g * weights.layers[0].row(0).transpose();
            return out;
        }
        case Family::residual_fcnn: {
            const FcnnCache c = run_fcnn(spec, weights, x);
            const int L = spec.depth;
            const double s = spec.branch_scale();
            const double up = spec.output_scale * dout(0);
            out.outputs = Vec::Constant(1, c.trace.output);
            grad_block(static_cast<std::size_t>(L - 1)) = up * c.trace.features.back().transpose();
            Vec g = up * weights.layers.back().row(0).transpose();
            for (int l = L - 1; l >= 2; --l) {
                const auto idx = static_cast<std::size_t>(l - 1);
                Vec dh = s * apply_derivative(spec.activation(l), c.pre[idx]).cwiseProduct(g);
                grad_block(idx) = dh * c.trace.features[idx - 1].transpose();
                Vec next = weights.layers[idx].transpose() * dh;
                if (spec.skip(l - 1)) next += g;
                g = std::move(next);
            }
            Vec dh = apply_derivative(spec.activation(1), c.pre[0]).cwiseProduct(g);
            grad_block(0) = dh * x.transpose();
            out.input_grad = weights.layers[0].transpose() * dh;
            return out;
        }
        case Family::residual_cnn: {
            const CnnCache c = run_cnn(spec, weights, x);
            const int L = spec.depth;
            const int k = spec.filter_size;
            const double s = spec.branch_scale();
            const double up = spec.output_scale * dout(0);
            out.outputs = Vec::Constant(1, c.trace.output);
            grad_block(static_cast<std::size_t>(L - 1)) = up * c.trace.features.back();
            Mat g = up * weights.layers.back();
            for (int l = L - 1; l >= 2; --l) {
                const auto idx = static_cast<std::size_t>(l - 1);
                Mat dh = s * apply_derivative(spec.activation(l), c.pre[idx]).cwiseProduct(g);
                grad_block(idx) = dh * c.patches[idx].transpose();
                Mat next = accumulate_patches(weights.layers[idx].transpose() * dh, k, spec.width);
                if (spec.skip(l - 1)) next += g;
                g = std::move(next);
            }
            Mat dh = apply_derivative(spec.activation(1), c.pre[0]).cwiseProduct(g);
            grad_block(0) = dh * c.patches[0].transpose();
            Mat gx = accumulate_patches(weights.layers[0].transpose() * dh, k, spec.input_dim);
            out.input_grad = Eigen::Map<const Vec>(gx.data(), gx.size());
            return out;
        }
        case Family::cell_network: return detail::cell_backprop(spec, weights, x, dout);
    }
    return out;
}

Vec gradient_wrt_weights(const NetworkSpec& spec, const WeightSet& weights, const Vec& x) {
    return backprop(spec, weights, x, Vec::Ones(static_cast<Eigen::Index>(spec.output_size()))).weight_grad;
}

namespace {

LossGradient loss_gradient(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, int label, bool wrt_input) {
    LossGradient out;
    if (is_binary(spec)) {
        if (label != 1 && label != -1) fail(ErrorKind::validation, "binary label must be +1 or -1");
        const double f = scalar_output(spec, weights, x);
        out.margin = label * f;
        out.loss = logistic_loss(out.margin);
        Vec dout = Vec::Constant(1, logistic_loss_derivative(out.margin) * label);
        Backprop bp = backprop(spec, weights, x, dout);
        out.gradient = wrt_input ? std::move(bp.input_grad) : std::move(bp.weight_grad);
        return out;
    }
    if (label < 0 || label >= spec.num_classes) fail(ErrorKind::validation, "class label out of range");
    const Vec logits = outputs(spec, weights, x);
    SoftmaxXent xent = softmax_cross_entropy(logits, label);
    out.loss = xent.loss;
    Vec others = logits;
    others(label) = -std::numeric_limits<double>::infinity();
    out.margin = logits(label) - others.maxCoeff();
    Backprop bp = backprop(spec, weights, x, xent.dlogits);
    out.gradient = wrt_input ? std::move(bp.input_grad) : std::move(bp.weight_grad);
    return out;
}

}  // namespace

LossGradient loss_gradient_wrt_input(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, int label) {
    return loss_gradient(spec, weights, x, label, true);
}

LossGradient loss_gradient_wrt_weights(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, int label) {
    return loss_gradient(spec, weights, x, label, false);
}

double sample_loss(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, int label) {
    if (is_binary(spec)) return logistic_loss(label * scalar_output(spec, weights, x));
    return softmax_cross_entropy(outputs(spec, weights, x), label).loss;
}

int predict_class(const NetworkSpec& spec, const WeightSet& weights, const Vec& x) {
    const Vec out = outputs(spec, weights, x);
    if (is_binary(spec)) return out(0) < 0 ? -1 : 1;
    Eigen::Index best = 0;
    out.maxCoeff(&best);
    return static_cast<int>(best);
}

}  // namespace robnas::netcore
