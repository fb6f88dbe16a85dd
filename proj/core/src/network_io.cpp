#include <nlohmann/json.hpp>

#include "ordpool/network.hpp"

namespace ordpool {

using nlohmann::json;

template <typename T>
std::string network_to_json(const Network<T>& net) {
  json doc;
  doc["network"] = net.spec().name;
  doc["pooling"] = to_string(net.spec().pooling);
  doc["activation"] = to_string(net.spec().activation);
  doc["ordinal_init"] = to_string(net.spec().ordinal_init);
  doc["input_shape"] = net.input_shape().dims();
  doc["precision"] = sizeof(T) == 4 ? 32 : 64;

  json layers = json::array();
  for (const auto& layer_ptr : net.layers()) {
    auto& layer = const_cast<Layer<T>&>(*layer_ptr);
    json jl;
    jl["kind"] = to_string(layer.kind());
    for (const auto& view : layer.param_views()) {
      json arr = json::array();
      for (std::int64_t i = 0; i < view.size; ++i) arr.push_back(static_cast<double>(view.data[i]));
      jl[view.name] = std::move(arr);
    }
    if (const auto* k = layer.kernel_set()) {
      json jk;
      jk["m"] = k->m();
      jk["n"] = k->n();
      jk["C"] = k->channels();
      json rows = json::array();
      for (std::int64_t c = 0; c < k->channels(); ++c) {
        json row = json::array();
        for (double w : k->channel(c)) row.push_back(w);
        rows.push_back(std::move(row));
      }
      jk["weights"] = std::move(rows);
      jl["kernels"] = std::move(jk);
    }
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(2);
}

template <typename T>
void network_load_json(Network<T>& net, const std::string& text) {
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw IoError("network JSON: parse error");
  if (!doc.contains("layers") || !doc["layers"].is_array()) throw IoError("network JSON: missing layers");
  const auto& layers = doc["layers"];
  if (layers.size() != net.layers().size())
    throw IoError("network JSON: layer count " + std::to_string(layers.size()) + " does not match network");

  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& layer = *net.layers()[i];
    const auto& jl = layers[i];
    if (jl.at("kind").get<std::string>() != to_string(layer.kind()))
      throw IoError("network JSON: layer " + std::to_string(i) + " kind mismatch");
    for (const auto& view : layer.param_views()) {
      const auto& arr = jl.at(view.name);
      if (!arr.is_array() || arr.size() != static_cast<std::size_t>(view.size))
        throw IoError("network JSON: layer " + std::to_string(i) + " '" + view.name + "' size mismatch");
      for (std::int64_t k = 0; k < view.size; ++k)
        view.data[k] = static_cast<T>(arr[static_cast<std::size_t>(k)].template get<double>());
    }
    if (auto* kset = layer.kernel_set()) {
      const auto& jk = jl.at("kernels");
      if (jk.at("m").get<std::int64_t>() != kset->m() || jk.at("n").get<std::int64_t>() != kset->n() ||
          jk.at("C").get<std::int64_t>() != kset->channels())
        throw IoError("network JSON: layer " + std::to_string(i) + " kernel geometry mismatch");
      const auto& rows = jk.at("weights");
      for (std::int64_t c = 0; c < kset->channels(); ++c) {
        const auto& row = rows.at(static_cast<std::size_t>(c));
        auto dst = kset->channel(c);
        if (row.size() != dst.size())
          throw IoError("network JSON: layer " + std::to_string(i) + " kernel row size mismatch");
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = row[k].get<double>();
      }
    }
  }
}

template std::string network_to_json<float>(const Network<float>&);
template std::string network_to_json<double>(const Network<double>&);
template void network_load_json<float>(Network<float>&, const std::string&);
template void network_load_json<double>(Network<double>&, const std::string&);

}  // namespace ordpool
