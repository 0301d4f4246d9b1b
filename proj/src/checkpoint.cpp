#include "mdi/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mdi {

using nn::Parameter;
using nn::Tensor;

namespace {

constexpr char kMagic[4] = {'M', 'D', 'L', 'K'};
constexpr std::uint8_t kDtypeF64 = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

void put_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError(ErrCode::bad_file, "truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw DataError(ErrCode::bad_file, "truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    std::uint64_t bits = get_u64(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

void put_blob(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_blob(std::istream& is) {
    std::uint64_t n = get_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw DataError(ErrCode::bad_file, "truncated checkpoint blob");
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, Model& model, const nlohmann::json& metadata) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(ErrCode::bad_file, "cannot write checkpoint '" + path + "'");
    os.write(kMagic, 4);
    put_u32(os, kCheckpointVersion);
    put_blob(os, model.config_json().dump());

    std::vector<Parameter*> params = model.parameters();
    std::sort(params.begin(), params.end(),
              [](const Parameter* a, const Parameter* b) { return a->name < b->name; });
    put_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        put_blob(os, p->name);
        os.put(static_cast<char>(kDtypeF64));
        put_u32(os, static_cast<std::uint32_t>(p->value.rows));
        put_u32(os, static_cast<std::uint32_t>(p->value.cols));
        for (double d : p->value.v) put_f64(os, d);
    }
    put_blob(os, metadata.dump());
    if (!os) throw DataError(ErrCode::bad_file, "failed writing checkpoint '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(ErrCode::bad_file, "cannot open checkpoint '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError(ErrCode::bad_file, "'" + path + "' is not a checkpoint");
    std::uint32_t version = get_u32(is);
    if (version != kCheckpointVersion)
        throw DataError(ErrCode::bad_file,
                        "unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.config = nlohmann::json::parse(get_blob(is));
    std::uint32_t n = get_u32(is);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = get_blob(is);
        int dtype = is.get();
        if (dtype != kDtypeF64)
            throw DataError(ErrCode::bad_file, "unsupported tensor dtype in '" + path + "'");
        int rows = static_cast<int>(get_u32(is));
        int cols = static_cast<int>(get_u32(is));
        Tensor t(rows, cols);
        for (double& d : t.v) d = get_f64(is);
        ckpt.tensors[name] = std::move(t);
    }
    ckpt.metadata = nlohmann::json::parse(get_blob(is));
    return ckpt;
}

std::unique_ptr<Model> model_from_config(const nlohmann::json& config) {
    std::string arch = config.at("arch").get<std::string>();
    Vocabulary vocab(config.at("vocab").get<std::vector<std::string>>());
    std::map<Task, LabelSet> label_sets;
    for (auto& [key, labels] : config.at("labels").items())
        label_sets[task_from_string(key)] = LabelSet(labels.get<std::vector<std::string>>());
    Task main_task = task_from_string(config.at("main_task").get<std::string>());
    std::uint64_t seed = config.value("init_seed", std::uint64_t{0});
    const nlohmann::json& cfg = config.at("config");

    if (arch == "encoder") {
        EncoderConfig ec;
        ec.vocab_size = cfg.at("vocab_size").get<int>();
        ec.layers = cfg.at("layers").get<int>();
        ec.heads = cfg.at("heads").get<int>();
        ec.model_dim = cfg.at("model_dim").get<int>();
        ec.ffn_dim = cfg.at("ffn_dim").get<int>();
        ec.max_seq_len = cfg.at("max_seq_len").get<int>();
        ec.mask_rate = cfg.at("mask_rate").get<double>();
        ec.mask_frac = cfg.value("mask_frac", 0.8);
        ec.random_frac = cfg.value("random_frac", 0.1);
        ec.pretrain_batch = cfg.value("pretrain_batch", 32);
        ec.finetune_batch = cfg.value("finetune_batch", 32);
        ec.pretrain_lr = cfg.value("pretrain_lr", 1e-3);
        ec.finetune_lr = cfg.value("finetune_lr", 2e-5);
        ec.epochs = cfg.value("epochs", 15);
        ec.patience = cfg.value("patience", 5);
        return std::make_unique<EncoderModel>(ec, std::move(vocab), std::move(label_sets),
                                              main_task, seed);
    }

    BiGruConfig bc;
    bc.vocab_size = cfg.at("vocab_size").get<int>();
    bc.embed_dim = cfg.at("embed_dim").get<int>();
    bc.layers = cfg.at("layers").get<int>();
    bc.units = cfg.at("units").get<int>();
    bc.max_seq_len = cfg.at("max_seq_len").get<int>();
    bc.batch_size = cfg.value("batch_size", 8);
    bc.dropout = cfg.at("dropout").get<double>();
    bc.lr = cfg.value("lr", 1e-3);
    bc.epochs = cfg.value("epochs", 15);
    bc.patience = cfg.value("patience", 5);

    BiGruArch a;
    if (arch == "single")
        a = BiGruArch::single_task;
    else if (arch == "mtl_common")
        a = BiGruArch::mtl_common_attn;
    else if (arch == "mtl_spec")
        a = BiGruArch::mtl_spec_attn;
    else if (arch == "hamtl")
        a = BiGruArch::hamtl;
    else
        throw DataError(ErrCode::bad_file, "unknown architecture '" + arch + "'");
    HaMtlOrder order = HaMtlOrder::city_first;
    if (config.contains("order") && config["order"].get<std::string>() == "country_first")
        order = HaMtlOrder::country_first;
    return std::make_unique<BiGruModel>(a, bc, std::move(vocab), std::move(label_sets), main_task,
                                        order, seed);
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt) {
    std::unique_ptr<Model> model = model_from_config(ckpt.config);
    std::vector<Parameter*> params = model->parameters();
    if (params.size() != ckpt.tensors.size())
        throw DataError(ErrCode::bad_file, "checkpoint tensor count mismatch");
    for (Parameter* p : params) {
        auto it = ckpt.tensors.find(p->name);
        if (it == ckpt.tensors.end())
            throw DataError(ErrCode::bad_file, "checkpoint missing tensor '" + p->name + "'");
        if (!it->second.same_shape(p->value))
            throw DataError(ErrCode::bad_file, "checkpoint tensor shape mismatch: " + p->name);
        p->value = it->second;
        p->grad = Tensor(p->value.rows, p->value.cols);
    }
    return model;
}

std::unique_ptr<Model> load_model(const std::string& path) {
    return model_from_checkpoint(read_checkpoint(path));
}

void copy_weights(Model& from, Model& to) {
    std::vector<Parameter*> src = from.parameters();
    std::vector<Parameter*> dst = to.parameters();
    if (src.size() != dst.size())
        throw DataError(ErrCode::shape_mismatch, "models differ in parameter count");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i]->name != dst[i]->name || !src[i]->value.same_shape(dst[i]->value))
            throw DataError(ErrCode::shape_mismatch, "parameter mismatch at " + src[i]->name);
        dst[i]->value = src[i]->value;
    }
}

} // namespace mdi
