#include "rolegraph/model.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "rolegraph/rng.hpp"

namespace rolegraph {

using nlohmann::json;

std::vector<NamedTensor> param_refs(ModelParams& p) {
  return {
      {"encoder.w_sum", &p.encoder.w_sum},
      {"encoder.b_sum", &p.encoder.b_sum},
      {"encoder.w_tok", &p.encoder.w_tok},
      {"encoder.b_tok", &p.encoder.b_tok},
      {"sel_encoder.w_sum", &p.sel_encoder.w_sum},
      {"sel_encoder.b_sum", &p.sel_encoder.b_sum},
      {"sel_encoder.w_tok", &p.sel_encoder.w_tok},
      {"sel_encoder.b_tok", &p.sel_encoder.b_tok},
      {"selector.w_a", &p.selector.w_a},
      {"selector.b_a", &p.selector.b_a},
      {"selector.w_b", &p.selector.w_b},
      {"selector.b_b", &p.selector.b_b},
      {"gcn.w1", &p.gcn.w1},
      {"gcn.w2", &p.gcn.w2},
      {"rnn.w", &p.rnn.w},
      {"rnn.u", &p.rnn.u},
      {"rnn.v", &p.rnn.v},
      {"rnn.b_h", &p.rnn.b_h},
      {"rnn.b_o", &p.rnn.b_o},
      {"heads.type.w1", &p.heads.type_mlp.w1},
      {"heads.type.b1", &p.heads.type_mlp.b1},
      {"heads.type.w2", &p.heads.type_mlp.w2},
      {"heads.type.b2", &p.heads.type_mlp.b2},
      {"heads.start.w1", &p.heads.start_mlp.w1},
      {"heads.start.b1", &p.heads.start_mlp.b1},
      {"heads.start.w2", &p.heads.start_mlp.w2},
      {"heads.start.b2", &p.heads.start_mlp.b2},
      {"heads.end.w1", &p.heads.end_mlp.w1},
      {"heads.end.b1", &p.heads.end_mlp.b1},
      {"heads.end.w2", &p.heads.end_mlp.w2},
      {"heads.end.b2", &p.heads.end_mlp.b2},
  };
}

bool is_stage2_tensor(const std::string& name) {
  return name.rfind("sel_encoder.", 0) != 0 && name.rfind("selector.", 0) != 0;
}

ModelParams make_params(const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  const std::size_t d = dims.embed_dim;
  const std::size_t dm = dims.d_model;

  p.encoder.w_sum = Matrix(summary_feature_dim(d), dm);
  p.encoder.b_sum = Matrix(1, dm);
  p.encoder.w_tok = Matrix(token_feature_dim(d), dm);
  p.encoder.b_tok = Matrix(1, dm);
  p.sel_encoder = p.encoder;

  p.selector.w_a = Matrix(dm, dims.h_sel);
  p.selector.b_a = Matrix(1, dims.h_sel);
  p.selector.w_b = Matrix(dims.h_sel, 1);
  p.selector.b_b = Matrix(1, 1);

  p.gcn.w1 = Matrix(2 * d, dims.f1);
  p.gcn.w2 = Matrix(dims.f1, dims.f2);

  const std::size_t d_in = dims.f2 + dm;
  p.rnn.w = Matrix(dims.rnn_hidden, dims.rnn_hidden);
  p.rnn.u = Matrix(dims.rnn_hidden, d_in);
  p.rnn.v = Matrix(1, dims.rnn_hidden);
  p.rnn.b_h = Matrix(1, dims.rnn_hidden);
  p.rnn.b_o = Matrix(1, 1);

  const std::size_t hh = dims.head_hidden;
  p.heads.type_mlp = {Matrix(dm, hh), Matrix(1, hh), Matrix(hh, 3), Matrix(1, 3)};
  const std::size_t span_in = dm + dims.f2;
  p.heads.start_mlp = {Matrix(span_in, hh), Matrix(1, hh), Matrix(hh, 1), Matrix(1, 1)};
  p.heads.end_mlp = {Matrix(span_in, hh), Matrix(1, hh), Matrix(hh, 1), Matrix(1, 1)};
  return p;
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  ModelParams p = make_params(dims);
  for (auto& [name, tensor] : param_refs(p)) {
    // Biases share the fan-in of their owning layer; w tensors are fan_in x out.
    std::size_t fan_in = tensor->rows;
    if (tensor->rows == 1) {
      if (name == "encoder.b_sum" || name == "sel_encoder.b_sum")
        fan_in = summary_feature_dim(dims.embed_dim);
      else if (name == "encoder.b_tok" || name == "sel_encoder.b_tok")
        fan_in = token_feature_dim(dims.embed_dim);
      else if (name == "selector.b_a")
        fan_in = dims.d_model;
      else if (name == "selector.b_b")
        fan_in = dims.h_sel;
      else if (name == "rnn.b_h" || name == "rnn.v" || name == "rnn.b_o")
        fan_in = dims.rnn_hidden;
      else if (name == "heads.type.b1")
        fan_in = dims.d_model;
      else if (name == "heads.start.b1" || name == "heads.end.b1")
        fan_in = dims.d_model + dims.f2;
      else if (name.rfind("heads.", 0) == 0)
        fan_in = dims.head_hidden;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng(seed ^ fnv1a64(name));
    for (double& x : tensor->data) x = rng.uniform(-bound, bound);
  }
  return p;
}

namespace {

constexpr char kMagic[] = "RGCKPT1\n";
constexpr int kVersion = 1;

json dims_json(const ModelDims& d) {
  return json{{"embed_dim", d.embed_dim}, {"d_model", d.d_model},      {"h_sel", d.h_sel},
              {"f1", d.f1},               {"f2", d.f2},                {"rnn_hidden", d.rnn_hidden},
              {"head_hidden", d.head_hidden}, {"oov_seed", d.oov_seed}};
}

ModelDims dims_from_json(const json& j) {
  ModelDims d;
  d.embed_dim = j.at("embed_dim").get<std::size_t>();
  d.d_model = j.at("d_model").get<std::size_t>();
  d.h_sel = j.at("h_sel").get<std::size_t>();
  d.f1 = j.at("f1").get<std::size_t>();
  d.f2 = j.at("f2").get<std::size_t>();
  d.rnn_hidden = j.at("rnn_hidden").get<std::size_t>();
  d.head_hidden = j.at("head_hidden").get<std::size_t>();
  d.oov_seed = j.at("oov_seed").get<std::uint64_t>();
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  ModelParams& mut = const_cast<ModelParams&>(params);
  const auto refs = param_refs(mut);

  json manifest;
  manifest["version"] = kVersion;
  manifest["dims"] = dims_json(params.dims);
  json tensors = json::array();
  for (const auto& [name, tensor] : refs)
    tensors.push_back({{"name", name}, {"rows", tensor->rows}, {"cols", tensor->cols}});
  manifest["tensors"] = std::move(tensors);
  const std::string header = manifest.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(out.good(), Errc::config_error, "cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic) - 1);
    const std::uint64_t len = header.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, tensor] : refs)
      out.write(reinterpret_cast<const char*>(tensor->data.data()),
                static_cast<std::streamsize>(tensor->data.size() * sizeof(double)));
    require(out.good(), Errc::config_error, "checkpoint write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::config_error, "cannot open checkpoint: " + path);
  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(magic)) == 0, Errc::malformed_record,
          "bad checkpoint magic: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  const json manifest = json::parse(header, nullptr, false);
  require(!manifest.is_discarded() && manifest.at("version").get<int>() == kVersion,
          Errc::malformed_record, "unsupported checkpoint version");

  ModelParams params = make_params(dims_from_json(manifest.at("dims")));
  auto refs = param_refs(params);
  const auto& tensors = manifest.at("tensors");
  require(tensors.size() == refs.size(), Errc::malformed_record, "checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& tj = tensors[i];
    require(tj.at("name").get<std::string>() == refs[i].name &&
                tj.at("rows").get<std::size_t>() == refs[i].tensor->rows &&
                tj.at("cols").get<std::size_t>() == refs[i].tensor->cols,
            Errc::malformed_record, "checkpoint tensor mismatch at " + refs[i].name);
    in.read(reinterpret_cast<char*>(refs[i].tensor->data.data()),
            static_cast<std::streamsize>(refs[i].tensor->data.size() * sizeof(double)));
  }
  require(in.good(), Errc::malformed_record, "checkpoint truncated: " + path);
  return params;
}

}  // namespace rolegraph
