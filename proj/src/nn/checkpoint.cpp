#include "xbar/nn/checkpoint.hpp"

#include "xbar/common/error.hpp"

namespace xbar::nn {

Container network_to_container(const Network& net, const nlohmann::json& extra_meta) {
  Container c;
  c.kind = "network";
  c.meta = extra_meta;
  c.meta["architecture"] = net.describe();
  const auto names = net.param_names();
  const auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) c.add(names[i], params[i]->shape(), params[i]->to_vector());
  return c;
}

Network network_from_container(const Container& c) {
  if (c.kind != "network") throw FormatError("expected a network checkpoint, found '" + c.kind + "'");
  if (!c.meta.contains("architecture")) throw FormatError("network checkpoint lacks an architecture");
  Network net = Network::from_description(c.meta.at("architecture"));
  const auto names = net.param_names();
  auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& a = c.array(names[i]);
    if (a.shape != params[i]->shape())
      throw FormatError("parameter " + names[i] + " has shape " + shape_string(a.shape) + ", expected " +
                        shape_string(params[i]->shape()));
    *params[i] = Tensor(a.shape, a.data);
  }
  return net;
}

void save_network(const std::filesystem::path& path, const Network& net, const nlohmann::json& extra_meta) {
  write_container(path, network_to_container(net, extra_meta));
}

Network load_network(const std::filesystem::path& path) { return network_from_container(read_container(path)); }

}  // namespace xbar::nn
