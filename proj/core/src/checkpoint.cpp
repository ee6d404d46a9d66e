#include "ordcast/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "ordcast/errors.hpp"
#include "ordcast/rng.hpp"

namespace ordcast {

namespace {

constexpr char kMagic[8] = {'O', 'R', 'D', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& value, const std::string& what) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("checkpoint truncated while reading " + what);
}

nlohmann::json config_to_json(const TrainingConfig& c) {
    return nlohmann::json{{"n_h", c.n_h},
                          {"dropout_rate", c.dropout_rate},
                          {"l2_lambda", c.l2_lambda},
                          {"max_epochs", c.max_epochs},
                          {"patience", c.patience},
                          {"learning_rate", c.learning_rate},
                          {"batch_size", c.batch_size},
                          {"encoder_len", c.encoder_len},
                          {"decoder_len", c.decoder_len},
                          {"seed", c.seed}};
}

TrainingConfig config_from_json(const nlohmann::json& j) {
    TrainingConfig c;
    c.n_h = j.at("n_h").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.l2_lambda = j.at("l2_lambda").get<double>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.encoder_len = j.at("encoder_len").get<int>();
    c.decoder_len = j.at("decoder_len").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

void save_checkpoint(const Seq2SeqModel& model, const CheckpointMetadata& metadata,
                     const std::string& path) {
    const auto tensors = model.tensor_refs();

    nlohmann::json header;
    header["tensors"] = nlohmann::json::array();
    std::size_t total = 0;
    for (const auto& t : tensors) {
        header["tensors"].push_back(
            {{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
        total += static_cast<std::size_t>(t.size());
    }
    header["config"] = config_to_json(model.hyper);
    header["quantizer"] = {{"m", model.quantizer.bins()},
                           {"lo", model.quantizer.lo()},
                           {"hi", model.quantizer.hi()},
                           {"id", model.quantizer.id()}};
    header["metadata"] = {{"epochs_run", metadata.epochs_run},
                          {"best_epoch", metadata.best_epoch},
                          {"best_val_loss", metadata.best_val_loss},
                          {"seed", metadata.seed}};

    std::vector<double> payload;
    payload.reserve(total);
    for (const auto& t : tensors)
        for (Eigen::Index r = 0; r < t.rows; ++r)
            for (Eigen::Index c = 0; c < t.cols; ++c) payload.push_back(t.at(r, c));

    const std::string header_bytes = header.dump();
    const std::uint64_t checksum =
        detail::fnv1a64(payload.data(), payload.size() * sizeof(double));

    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_raw(out, kVersion);
    write_raw(out, static_cast<std::uint64_t>(header_bytes.size()));
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    write_raw(out, static_cast<std::uint64_t>(payload.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    write_raw(out, checksum);
    if (!out) throw DataError("write failed for checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a model checkpoint: " + path);

    std::uint32_t version = 0;
    read_raw(in, version, "version");
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) +
                        " (expected " + std::to_string(kVersion) + "): " + path);

    std::uint64_t header_len = 0;
    read_raw(in, header_len, "header length");
    std::string header_bytes(header_len, '\0');
    in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw DataError("checkpoint truncated while reading header: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_bytes);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint header corrupted: " + path + ": " + e.what());
    }

    std::uint64_t payload_len = 0;
    read_raw(in, payload_len, "payload length");
    std::vector<double> payload(payload_len);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload_len * sizeof(double)));
    if (!in) throw DataError("checkpoint truncated while reading tensors: " + path);

    std::uint64_t stored_checksum = 0;
    read_raw(in, stored_checksum, "checksum");
    const std::uint64_t checksum =
        detail::fnv1a64(payload.data(), payload.size() * sizeof(double));
    if (checksum != stored_checksum)
        throw DataError("checkpoint payload checksum mismatch: " + path);

    TrainingConfig cfg;
    CheckpointMetadata meta;
    try {
        cfg = config_from_json(header.at("config"));
        const auto& jq = header.at("quantizer");
        const auto& jm = header.at("metadata");
        meta.epochs_run = jm.at("epochs_run").get<int>();
        meta.best_epoch = jm.at("best_epoch").get<int>();
        meta.best_val_loss = jm.at("best_val_loss").get<double>();
        meta.seed = jm.at("seed").get<std::uint64_t>();

        OrdinalQuantizer quantizer(jq.at("m").get<int>(), jq.at("lo").get<double>(),
                                   jq.at("hi").get<double>(),
                                   jq.value("id", std::string{}));
        Seq2SeqModel model = init_seq2seq(quantizer, cfg);

        auto tensors = model.tensor_refs();
        const auto& jtensors = header.at("tensors");
        if (jtensors.size() != tensors.size())
            throw DataError("checkpoint tensor manifest does not match model layout: " + path);
        std::size_t total = 0;
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            const auto& jt = jtensors[i];
            if (jt.at("name").get<std::string>() != tensors[i].name ||
                jt.at("rows").get<Eigen::Index>() != tensors[i].rows ||
                jt.at("cols").get<Eigen::Index>() != tensors[i].cols)
                throw DataError("checkpoint tensor manifest does not match model layout: " +
                                path);
            total += static_cast<std::size_t>(tensors[i].size());
        }
        if (total != payload.size())
            throw DataError("checkpoint payload length disagrees with its manifest: " + path);

        std::size_t pos = 0;
        for (auto& t : tensors)
            for (Eigen::Index r = 0; r < t.rows; ++r)
                for (Eigen::Index c = 0; c < t.cols; ++c) t.at(r, c) = payload[pos++];

        return LoadedCheckpoint{std::move(model), meta};
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint header schema error: " + path + ": " + e.what());
    }
}

}  // namespace ordcast
