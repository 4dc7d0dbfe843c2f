#pragma once

#include <map>
#include <string>

#include "das/model.hpp"

namespace das::model {

// A loaded checkpoint: the configuration that shaped the weights, the
// weights themselves, and free-form metadata (e.g. companion file names).
struct Checkpoint {
  ModelConfig config;
  ModelParams<float> params;
  std::map<std::string, std::string> meta;
};

// Writes a single self-describing binary file: magic + format version, the
// configuration and metadata as key/value strings, then every parameter
// tensor with its traversal name, rank, dims, and float32 payload
// (little-endian). The file is staged at `<path>.tmp` and renamed into
// place, so readers never observe a partial checkpoint.
// Raises: contract if params don't match cfg's shapes, io on write failure.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams<float>& params,
                     const std::map<std::string, std::string>& meta = {});

// Reads a checkpoint written by save_checkpoint.
// Raises: io if the file can't be read, compat if it is not a checkpoint,
// has an unsupported version, or its tensors don't match its configuration.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace das::model
