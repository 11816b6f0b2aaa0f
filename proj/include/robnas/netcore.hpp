#pragma once

#include "robnas/cellspace.hpp"
#include "robnas/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace robnas::netcore {

enum class Family {
    linear,         // f(x) = <w, x>; reference model for closed-form checks
    residual_fcnn,  // scaled residual fully connected network
    residual_cnn,   // scaled residual 1-D convolutional network on d x p inputs
    cell_network,   // stem -> stacked genotype cells -> global pool -> classifier
};

enum class ActivationKind { relu, leaky_relu, sigmoid, erf, identity };

struct Activation {
    ActivationKind kind = ActivationKind::relu;
    double slope = 0.01;  // leaky_relu only

    [[nodiscard]] double operator()(double z) const;
    [[nodiscard]] double derivative(double z) const;
    [[nodiscard]] std::string name() const;
    static Activation parse(const std::string& text);
};

struct NetworkSpec {
    Family family = Family::residual_fcnn;
    int depth = 3;        // L; 2 gives the plain two-layer network
    int width = 64;       // m (channels for the CNN)
    int input_dim = 1;    // d (input channels for the CNN)
    int pixels = 1;       // p, CNN only
    int filter_size = 1;  // kappa, CNN only, odd
    std::vector<Activation> activations;  // sigma_1..sigma_{L-1}; empty means relu everywhere
    std::vector<int> skip_flags;          // alpha_1..alpha_{L-2}; empty means all zero
    double output_scale = 1.0;
    // Drops the 1/L branch factor. Exists only so tests can show the factor matters.
    bool unscaled_branches = false;

    // cell_network
    cellspace::Genotype genotype{};
    int cell_count = 2;
    int stem_channels = 8;
    int in_channels = 3;
    int image_size = 8;
    int num_classes = 10;

    void validate() const;
    [[nodiscard]] Activation activation(int layer) const;  // 1-based layer index
    [[nodiscard]] int skip(int layer) const;               // alpha_layer, 1-based
    [[nodiscard]] double branch_scale() const;
    [[nodiscard]] std::size_t input_size() const;
    [[nodiscard]] std::size_t output_size() const;  // 1, or num_classes for cell networks
};

std::string family_name(Family f);
Family parse_family(const std::string& text);

struct LayerShape {
    Eigen::Index rows;
    Eigen::Index cols;
};

std::vector<LayerShape> layer_shapes(const NetworkSpec& spec);

// Weights are immutable once built; training produces new sets.
struct WeightSet {
    std::vector<Mat> layers;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t parameter_count() const;
    // Layer-major, row-major within a layer.
    [[nodiscard]] Vec flatten() const;
    [[nodiscard]] WeightSet with_flat(const Vec& flat) const;
    bool operator==(const WeightSet& other) const;
};

// Entries i.i.d. N(0, 1/m) for the theory families (1/d for linear); the cell
// network uses N(0, 1/fan_in) and zero classifier bias.
WeightSet init_weights(const NetworkSpec& spec, std::uint64_t seed);

// Checks layer shapes against the spec; the error names the first bad layer.
void check_weights(const NetworkSpec& spec, const WeightSet& weights);

struct FcnnTrace {
    double output = 0.0;
    std::vector<Vec> features;  // f_1 .. f_{L-1}
};

FcnnTrace forward_fcnn(const NetworkSpec& spec, const WeightSet& weights, const Vec& x);

// Column j stacks X[:, j-(k-1)/2 .. j+(k-1)/2], zero outside [0, p).
Mat extract_patches(const Mat& x, int filter_size);
// Adjoint of extract_patches: scatters patch rows back onto the d x p grid.
Mat accumulate_patches(const Mat& patches, int filter_size, Eigen::Index channels);

struct CnnTrace {
    double output = 0.0;
    std::vector<Mat> features;  // F_1 .. F_{L-1}
};

// Input X is d x p, passed flattened row-major (channel-major).
CnnTrace forward_cnn(const NetworkSpec& spec, const WeightSet& weights, const Vec& x);
// Independent route: evaluates the convolution sum directly from the kernel
// tensor W(u, i, v) = W_patch(i, u*d + v).
double forward_cnn_direct(const NetworkSpec& spec, const WeightSet& weights, const Vec& x);

Vec forward_cell_network(const NetworkSpec& spec, const WeightSet& weights, const Vec& x);

// Raw outputs: size 1, or class logits for cell networks.
Vec outputs(const NetworkSpec& spec, const WeightSet& weights, const Vec& x);
// Scalar network output f. For cell networks this is the sum of the logits.
double scalar_output(const NetworkSpec& spec, const WeightSet& weights, const Vec& x);

struct Backprop {
    Vec outputs;
    Vec weight_grad;  // flattened, same layout as WeightSet::flatten
    Vec input_grad;
};

// Reverse-mode pass for the vector-Jacobian product with dout (size output_size()).
Backprop backprop(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, const Vec& dout);

Vec gradient_wrt_weights(const NetworkSpec& spec, const WeightSet& weights, const Vec& x);

// Per-sample training loss: logistic loss of y*f for binary families (label in
// {-1,+1}), softmax cross-entropy for cell networks (label is a class index).
struct LossGradient {
    double loss = 0.0;
    double margin = 0.0;  // y*f for binary families; logit margin for cell networks
    Vec gradient;
};

LossGradient loss_gradient_wrt_input(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, int label);
LossGradient loss_gradient_wrt_weights(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, int label);
double sample_loss(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, int label);
// Predicted class for cell networks; sign convention for binary families handled in objective.
int predict_class(const NetworkSpec& spec, const WeightSet& weights, const Vec& x);

bool is_binary(const NetworkSpec& spec);

}  // namespace robnas::netcore
