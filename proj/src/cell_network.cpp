#include "cell_network_impl.hpp"

#include "robnas/error.hpp"

namespace robnas::netcore::detail {

using cellspace::Operator;

namespace {

// Feature maps are channels x (H*W), row-major over (h, w).
struct Geometry {
    int height;
    int width;
    [[nodiscard]] Eigen::Index pixels() const { return static_cast<Eigen::Index>(height) * width; }
};

int kernel_size(Operator op) { return op == Operator::conv3x3 ? 3 : 1; }
bool is_conv(Operator op) { return op == Operator::conv3x3 || op == Operator::conv1x1; }

// Rows are ordered (channel, ky, kx); stride 1, zero padding (k-1)/2.
Mat im2col(const Mat& x, int k, const Geometry& g) {
    const Eigen::Index channels = x.rows();
    const int half = (k - 1) / 2;
    Mat cols = Mat::Zero(channels * k * k, g.pixels());
    for (Eigen::Index c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Eigen::Index row = (c * k + ky) * k + kx;
                for (int h = 0; h < g.height; ++h) {
                    const int sh = h + ky - half;
                    if (sh < 0 || sh >= g.height) continue;
                    for (int w = 0; w < g.width; ++w) {
                        const int sw = w + kx - half;
                        if (sw < 0 || sw >= g.width) continue;
                        cols(row, h * g.width + w) = x(c, sh * g.width + sw);
                    }
                }
            }
        }
    }
    return cols;
}

Mat col2im(const Mat& cols, Eigen::Index channels, int k, const Geometry& g) {
    const int half = (k - 1) / 2;
    Mat x = Mat::Zero(channels, g.pixels());
    for (Eigen::Index c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Eigen::Index row = (c * k + ky) * k + kx;
                for (int h = 0; h < g.height; ++h) {
                    const int sh = h + ky - half;
                    if (sh < 0 || sh >= g.height) continue;
                    for (int w = 0; w < g.width; ++w) {
                        const int sw = w + kx - half;
                        if (sw < 0 || sw >= g.width) continue;
                        x(c, sh * g.width + sw) += cols(row, h * g.width + w);
                    }
                }
            }
        }
    }
    return x;
}

// 3x3 mean pool, stride 1, zero padding 1, always divided by 9. Self-adjoint.
Mat avg_pool(const Mat& x, const Geometry& g) {
    Mat out = Mat::Zero(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
        for (int h = 0; h < g.height; ++h) {
            for (int w = 0; w < g.width; ++w) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int sh = h + dy;
                        const int sw = w + dx;
                        if (sh < 0 || sh >= g.height || sw < 0 || sw >= g.width) continue;
                        acc += x(c, sh * g.width + sw);
                    }
                }
                out(c, h * g.width + w) = acc / 9.0;
            }
        }
    }
    return out;
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

struct EdgeCache {
    Mat cols;  // im2col of relu(source), conv edges only
};

struct CellCache {
    std::array<Mat, cellspace::kNumNodes> nodes;
    std::array<EdgeCache, cellspace::kNumEdges> edges;
};

struct LayerIndex {
    std::size_t stem = 0;
    std::vector<std::array<int, cellspace::kNumEdges>> edge_layer;  // -1 when the edge has no weights
    std::size_t classifier = 0;
    std::size_t bias = 0;
};

LayerIndex index_layers(const NetworkSpec& spec) {
    LayerIndex idx;
    std::size_t next = 1;
    for (int c = 0; c < spec.cell_count; ++c) {
        std::array<int, cellspace::kNumEdges> row{};
        for (std::size_t e = 0; e < cellspace::kNumEdges; ++e)
            row[e] = is_conv(spec.genotype.op(e)) ? static_cast<int>(next++) : -1;
        idx.edge_layer.push_back(row);
    }
    idx.classifier = next++;
    idx.bias = next;
    return idx;
}

Mat run_cell(const NetworkSpec& spec, const WeightSet& w, const std::array<int, cellspace::kNumEdges>& layers,
             const Mat& input, const Geometry& g, CellCache* cache) {
    std::array<Mat, cellspace::kNumNodes> nodes;
    nodes[0] = input;
    for (std::size_t n = 1; n < cellspace::kNumNodes; ++n) nodes[n] = Mat::Zero(input.rows(), input.cols());
    for (std::size_t e = 0; e < cellspace::kNumEdges; ++e) {
        // Edges are ordered so that every source node is complete before use.
        const auto [from, to] = cellspace::kEdges[e];
        const Operator op = spec.genotype.op(e);
        const Mat& src = nodes[static_cast<std::size_t>(from)];
        Mat& dst = nodes[static_cast<std::size_t>(to)];
        switch (op) {
            case Operator::zeroize: break;
            case Operator::skip_connect: dst += src; break;
            case Operator::avg_pool: dst += avg_pool(src, g); break;
            case Operator::conv3x3:
            case Operator::conv1x1: {
                Mat cols = im2col(relu(src), kernel_size(op), g);
                dst += w.layers[static_cast<std::size_t>(layers[e])] * cols;
                if (cache) cache->edges[e].cols = std::move(cols);
                break;
            }
        }
    }
    Mat out = nodes[cellspace::kNumNodes - 1];
    if (cache) cache->nodes = std::move(nodes);
    return out;
}

}  // namespace

std::vector<LayerShape> cell_layer_shapes(const NetworkSpec& spec) {
    const Eigen::Index c = spec.stem_channels;
    std::vector<LayerShape> shapes;
    shapes.push_back({c, static_cast<Eigen::Index>(spec.in_channels) * 9});
    for (int cell = 0; cell < spec.cell_count; ++cell) {
        for (std::size_t e = 0; e < cellspace::kNumEdges; ++e) {
            const Operator op = spec.genotype.op(e);
            if (!is_conv(op)) continue;
            const int k = kernel_size(op);
            shapes.push_back({c, c * k * k});
        }
    }
    shapes.push_back({spec.num_classes, c});
    shapes.push_back({spec.num_classes, 1});
    return shapes;
}

double cell_init_variance(const NetworkSpec& spec, std::size_t layer, const LayerShape& shape) {
    if (layer + 1 == cell_layer_shapes(spec).size()) return 0.0;  // classifier bias
    return 1.0 / static_cast<double>(shape.cols);
}

Vec cell_forward(const NetworkSpec& spec, const WeightSet& w, const Vec& x) {
    const Geometry g{spec.image_size, spec.image_size};
    const LayerIndex idx = index_layers(spec);
    Eigen::Map<const Mat> input(x.data(), spec.in_channels, g.pixels());
    Mat feat = w.layers[idx.stem] * im2col(input, 3, g);
    for (int c = 0; c < spec.cell_count; ++c)
        feat = run_cell(spec, w, idx.edge_layer[static_cast<std::size_t>(c)], feat, g, nullptr);
    const Vec pooled = feat.rowwise().mean();
    return w.layers[idx.classifier] * pooled + w.layers[idx.bias].col(0);
}

Backprop cell_backprop(const NetworkSpec& spec, const WeightSet& w, const Vec& x, const Vec& dout) {
    const Geometry g{spec.image_size, spec.image_size};
    const LayerIndex idx = index_layers(spec);
    Eigen::Map<const Mat> input(x.data(), spec.in_channels, g.pixels());

    const Mat stem_cols = im2col(input, 3, g);
    std::vector<CellCache> caches(static_cast<std::size_t>(spec.cell_count));
    Mat feat = w.layers[idx.stem] * stem_cols;
    for (int c = 0; c < spec.cell_count; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        feat = run_cell(spec, w, idx.edge_layer[ci], feat, g, &caches[ci]);
    }
    const Vec pooled = feat.rowwise().mean();

    Backprop out;
    out.outputs = w.layers[idx.classifier] * pooled + w.layers[idx.bias].col(0);
    out.weight_grad = Vec::Zero(static_cast<Eigen::Index>(w.parameter_count()));
    std::vector<Eigen::Index> offsets;
    {
        Eigen::Index o = 0;
        for (const auto& l : w.layers) {
            offsets.push_back(o);
            o += l.size();
        }
    }
    auto grad_block = [&](std::size_t layer) {
        const auto& l = w.layers[layer];
        return Eigen::Map<Mat>(out.weight_grad.data() + offsets[layer], l.rows(), l.cols());
    };

    grad_block(idx.classifier) = dout * pooled.transpose();
    grad_block(idx.bias) = dout;
    const Vec dpooled = w.layers[idx.classifier].transpose() * dout;
    Mat dfeat = dpooled.replicate(1, g.pixels()) / static_cast<double>(g.pixels());

    for (int c = spec.cell_count - 1; c >= 0; --c) {
        const auto ci = static_cast<std::size_t>(c);
        const CellCache& cache = caches[ci];
        std::array<Mat, cellspace::kNumNodes> dnode;
        for (auto& d : dnode) d = Mat::Zero(dfeat.rows(), dfeat.cols());
        dnode[cellspace::kNumNodes - 1] = dfeat;
        for (std::size_t e = cellspace::kNumEdges; e-- > 0;) {
            const auto [from, to] = cellspace::kEdges[e];
            const Operator op = spec.genotype.op(e);
            const Mat& dy = dnode[static_cast<std::size_t>(to)];
            Mat& dx = dnode[static_cast<std::size_t>(from)];
            switch (op) {
                case Operator::zeroize: break;
                case Operator::skip_connect: dx += dy; break;
                case Operator::avg_pool: dx += avg_pool(dy, g); break;
                case Operator::conv3x3:
                case Operator::conv1x1: {
                    const auto layer = static_cast<std::size_t>(idx.edge_layer[ci][e]);
                    grad_block(layer) += dy * cache.edges[e].cols.transpose();
                    Mat dr = col2im(w.layers[layer].transpose() * dy, dy.rows(), kernel_size(op), g);
                    const Mat& src = cache.nodes[static_cast<std::size_t>(from)];
                    dx += dr.cwiseProduct((src.array() > 0.0).cast<double>().matrix());
                    break;
                }
            }
        }
        dfeat = std::move(dnode[0]);
    }

    grad_block(idx.stem) = dfeat * stem_cols.transpose();
    Mat dinput = col2im(w.layers[idx.stem].transpose() * dfeat, spec.in_channels, 3, g);
    out.input_grad = Eigen::Map<const Vec>(dinput.data(), dinput.size());
    return out;
}

}  // namespace robnas::netcore::detail
