#pragma once

#include <cstdint>
#include <string>

#include "ordcast/seq2seq.hpp"

namespace ordcast {

// Training provenance stored alongside the tensors.
struct CheckpointMetadata {
    int epochs_run = 0;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    std::uint64_t seed = 0;
};

struct LoadedCheckpoint {
    Seq2SeqModel model;
    CheckpointMetadata metadata;
};

// Binary container: magic, version word, a JSON header carrying the tensor
// manifest (names and shapes), the training config, the quantizer and the
// metadata, then the flat row-major float64 payload and its checksum. Round
// trips are bit-exact. Loading verifies magic, version, manifest/payload
// agreement and the checksum before any tensor is touched.
void save_checkpoint(const Seq2SeqModel& model, const CheckpointMetadata& metadata,
                     const std::string& path);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace ordcast
