#include "xbar/mapping/report.hpp"

#include "xbar/common/container.hpp"

namespace xbar::mapping {

nlohmann::json mapping_report(const std::vector<const MappedLayer*>& layers, const QuantConfig& qc) {
  nlohmann::json j;
  j["quantization"] = {{"input_bits", qc.input_bits},
                       {"weight_bits", qc.weight_bits},
                       {"stream_bits", qc.stream_bits},
                       {"slice_bits", qc.slice_bits},
                       {"streams", qc.streams()},
                       {"slices", qc.slices()}};
  j["layers"] = nlohmann::json::array();
  std::size_t tiles = 0, crossbars = 0;
  for (const auto* m : layers) {
    const auto& g = m->grid;
    nlohmann::json l = {{"layer", m->layer_index},
                        {"type", nn::to_string(m->kind)},
                        {"matrix", {m->fan_in, m->out}},
                        {"crossbar", {g.tile_rows, g.tile_cols}},
                        {"tile_grid", {g.grid_rows, g.grid_cols}},
                        {"tiles", g.tiles.size()},
                        {"crossbars", g.crossbar_count()},
                        {"weight_scale", m->weights.scale},
                        {"mvms_per_input_vector", g.crossbar_count() * static_cast<std::size_t>(qc.streams())}};
    if (m->conv) l["patches_per_sample"] = m->conv->patches();
    j["layers"].push_back(l);
    tiles += g.tiles.size();
    crossbars += g.crossbar_count();
  }
  j["total_tiles"] = tiles;
  j["total_crossbars"] = crossbars;
  return j;
}

void write_mapping_report(const std::filesystem::path& path, const nlohmann::json& report) {
  write_file_atomic(path, report.dump(2) + "\n");
}

}  // namespace xbar::mapping
