#include "ordpool/network.hpp"

namespace ordpool {

const char* to_string(PoolingChoice c) {
  switch (c) {
    case PoolingChoice::classic_avg: return "classic-avg";
    case PoolingChoice::classic_max: return "classic-max";
    case PoolingChoice::classic_min: return "classic-min";
    case PoolingChoice::ordinal: return "ordinal";
  }
  return "?";
}

PoolingChoice pooling_choice_from_string(const std::string& s) {
  if (s == "classic-avg" || s == "avg") return PoolingChoice::classic_avg;
  if (s == "classic-max" || s == "max") return PoolingChoice::classic_max;
  if (s == "classic-min" || s == "min") return PoolingChoice::classic_min;
  if (s == "ordinal") return PoolingChoice::ordinal;
  throw ConfigError("unknown pooling choice '" + s + "' (expected avg|max|min|ordinal)");
}

const char* to_string(LayerSpec::Kind k) {
  switch (k) {
    case LayerSpec::Kind::conv2d: return "conv2d";
    case LayerSpec::Kind::activation: return "activation";
    case LayerSpec::Kind::pool: return "pool";
    case LayerSpec::Kind::flatten: return "flatten";
    case LayerSpec::Kind::fully_connected: return "fully_connected";
  }
  return "?";
}

std::vector<LayerSpec> layer_specs(const NetworkSpec& spec) {
  PoolOp pool_op = PoolOp::avg;
  switch (spec.pooling) {
    case PoolingChoice::classic_avg: pool_op = PoolOp::avg; break;
    case PoolingChoice::classic_max: pool_op = PoolOp::max; break;
    case PoolingChoice::classic_min: pool_op = PoolOp::min; break;
    case PoolingChoice::ordinal: pool_op = PoolOp::ordinal; break;
  }

  std::vector<LayerSpec> out;
  if (spec.name == "baseline") {
    out.push_back(LayerSpec::conv(5, 5, 32, false));
    out.push_back(LayerSpec::activation_of(spec.activation));
    out.push_back(LayerSpec::pool2x2(pool_op));
    out.push_back(LayerSpec::conv(5, 5, 64, false));
    out.push_back(LayerSpec::activation_of(spec.activation));
    out.push_back(LayerSpec::global_pool(pool_op));
    out.push_back(LayerSpec::flatten());
    out.push_back(LayerSpec::fc(10));
  } else if (spec.name == "baseline2") {
    out.push_back(LayerSpec::conv(3, 3, 16, true));
    out.push_back(LayerSpec::activation_of(spec.activation));
    out.push_back(LayerSpec::pool2x2(pool_op));
    out.push_back(LayerSpec::conv(3, 3, 32, true));
    out.push_back(LayerSpec::activation_of(spec.activation));
    out.push_back(LayerSpec::pool2x2(pool_op));
    out.push_back(LayerSpec::conv(3, 3, 64, true));
    out.push_back(LayerSpec::activation_of(spec.activation));
    out.push_back(LayerSpec::global_pool(pool_op));
    out.push_back(LayerSpec::flatten());
    out.push_back(LayerSpec::fc(10));
  } else if (spec.name == "lenet5") {
    out.push_back(LayerSpec::conv(5, 5, 6, true));
    out.push_back(LayerSpec::activation_of(spec.activation));
    out.push_back(LayerSpec::pool2x2(pool_op));
    out.push_back(LayerSpec::conv(5, 5, 16, false));
    out.push_back(LayerSpec::activation_of(spec.activation));
    out.push_back(LayerSpec::pool2x2(pool_op));
    out.push_back(LayerSpec::flatten());
    out.push_back(LayerSpec::fc(120));
    out.push_back(LayerSpec::activation_of(Activation::relu));
    out.push_back(LayerSpec::fc(84));
    out.push_back(LayerSpec::activation_of(Activation::relu));
    out.push_back(LayerSpec::fc(10));
  } else {
    throw ConfigError("unknown network '" + spec.name + "' (expected baseline|baseline2|lenet5)");
  }
  return out;
}

}  // namespace ordpool
