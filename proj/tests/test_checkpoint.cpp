#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ordcast/checkpoint.hpp"
#include "ordcast/errors.hpp"
#include "support.hpp"

using namespace ordcast;
namespace fs = std::filesystem;

namespace {

Seq2SeqModel make_model() {
    TrainingConfig cfg;
    cfg.n_h = 6;
    cfg.dropout_rate = 0.4;
    cfg.l2_lambda = 3e-7;
    cfg.max_epochs = 17;
    cfg.patience = 4;
    cfg.learning_rate = 2.5e-3;
    cfg.batch_size = 9;
    cfg.encoder_len = 11;
    cfg.decoder_len = 5;
    cfg.seed = 99;
    OrdinalQuantizer q(8, -1.25, 3.75, "ckpt-test");
    return init_seq2seq(q, cfg);
}

}  // namespace

TEST_CASE("checkpoints round trip bit-exactly") {
    auto dir = testsupport::fresh_dir("ordcast-ckpt");
    Seq2SeqModel model = make_model();
    // atypical doubles should survive unchanged
    model.projection(0, 0) = 0.1;
    model.projection(1, 0) = -1e-300;
    model.encoder.biases(2) = 1.0 / 3.0;

    CheckpointMetadata meta{12, 7, 2.25, 424242};
    auto path = (dir / "model.ckpt").string();
    save_checkpoint(model, meta, path);

    LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(weight_checksum(loaded.model) == weight_checksum(model));

    auto a = model.tensor_refs();
    auto b = loaded.model.tensor_refs();
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        REQUIRE(a[t].size() == b[t].size());
        for (Eigen::Index i = 0; i < a[t].size(); ++i)
            CHECK(a[t].data[i] == b[t].data[i]);
    }

    CHECK(loaded.model.quantizer.bins() == 8);
    CHECK(loaded.model.quantizer.lo() == -1.25);
    CHECK(loaded.model.quantizer.hi() == 3.75);
    CHECK(loaded.model.quantizer.id() == "ckpt-test");

    CHECK(loaded.model.hyper.n_h == 6);
    CHECK(loaded.model.hyper.dropout_rate == 0.4);
    CHECK(loaded.model.hyper.l2_lambda == 3e-7);
    CHECK(loaded.model.hyper.max_epochs == 17);
    CHECK(loaded.model.hyper.patience == 4);
    CHECK(loaded.model.hyper.learning_rate == 2.5e-3);
    CHECK(loaded.model.hyper.batch_size == 9);
    CHECK(loaded.model.hyper.encoder_len == 11);
    CHECK(loaded.model.hyper.decoder_len == 5);
    CHECK(loaded.model.hyper.seed == 99);

    CHECK(loaded.metadata.epochs_run == 12);
    CHECK(loaded.metadata.best_epoch == 7);
    CHECK(loaded.metadata.best_val_loss == 2.25);
    CHECK(loaded.metadata.seed == 424242);

    // the loaded model computes the very same forward pass
    OrdinalSequence ctx{{0, 3, 7, 2}, ""};
    LstmState s1 = encoder_forward(model, ctx);
    LstmState s2 = encoder_forward(loaded.model, ctx);
    CHECK((s1.h - s2.h).cwiseAbs().maxCoeff() == 0.0);
    auto d1 = decoder_step(model, s1.h, s1.c, 2);
    auto d2 = decoder_step(loaded.model, s2.h, s2.c, 2);
    for (std::size_t i = 0; i < d1.probs.size(); ++i) CHECK(d1.probs[i] == d2.probs[i]);

    // saving the loaded model reproduces the file byte for byte
    auto path2 = (dir / "model2.ckpt").string();
    save_checkpoint(loaded.model, loaded.metadata, path2);
    CHECK(testsupport::read_file(path) == testsupport::read_file(path2));
}

TEST_CASE("saving creates missing parent directories") {
    auto dir = testsupport::fresh_dir("ordcast-ckpt-mkdir");
    auto path = (dir / "deep" / "nested" / "model.ckpt").string();
    save_checkpoint(make_model(), CheckpointMetadata{}, path);
    CHECK(weight_checksum(load_checkpoint(path).model) == weight_checksum(make_model()));
}

TEST_CASE("a truncated checkpoint is refused") {
    auto dir = testsupport::fresh_dir("ordcast-ckpt-trunc");
    auto path = (dir / "model.ckpt").string();
    save_checkpoint(make_model(), CheckpointMetadata{}, path);

    const auto full = fs::file_size(path);
    fs::resize_file(path, full - 10);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated"), DataError);
}

TEST_CASE("a corrupted payload fails its checksum") {
    auto dir = testsupport::fresh_dir("ordcast-ckpt-corrupt");
    auto path = (dir / "model.ckpt").string();
    save_checkpoint(make_model(), CheckpointMetadata{}, path);

    // flip one byte near the end of the payload (before the trailing checksum)
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(-16, std::ios::end);
    char byte = 0;
    f.read(&byte, 1);
    f.seekp(-16, std::ios::end);
    byte = static_cast<char>(byte ^ 0x5a);
    f.write(&byte, 1);
    f.close();

    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("checksum"), DataError);
}

TEST_CASE("an unknown version is refused by name") {
    auto dir = testsupport::fresh_dir("ordcast-ckpt-version");
    auto path = (dir / "model.ckpt").string();
    save_checkpoint(make_model(), CheckpointMetadata{}, path);

    // the version word sits right after the 8-byte magic
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8, std::ios::beg);
    const std::uint32_t v2 = 2;
    f.write(reinterpret_cast<const char*>(&v2), sizeof v2);
    f.close();

    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("unsupported checkpoint version 2"), DataError);
}

TEST_CASE("files that are not checkpoints are refused") {
    auto dir = testsupport::fresh_dir("ordcast-ckpt-magic");
    auto path = (dir / "nope.ckpt").string();
    std::ofstream(path) << "just some text, definitely not a checkpoint";
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("not a model checkpoint"),
                         DataError);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), DataError);
}
