#pragma once

#include "robnas/netcore.hpp"

namespace robnas::netcore::detail {

std::vector<LayerShape> cell_layer_shapes(const NetworkSpec& spec);
double cell_init_variance(const NetworkSpec& spec, std::size_t layer, const LayerShape& shape);
Vec cell_forward(const NetworkSpec& spec, const WeightSet& weights, const Vec& x);
Backprop cell_backprop(const NetworkSpec& spec, const WeightSet& weights, const Vec& x, const Vec& dout);

}  // namespace robnas::netcore::detail
