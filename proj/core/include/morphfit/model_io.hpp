#pragma once

#include <filesystem>
#include <string>

#include "morphfit/model.hpp"

namespace morphfit {

/// Binary model container, little-endian:
///   "MFIT0001"                                   8-byte magic (4-char tag + 4-digit version)
///   u32 N, u32 N_a, u32 N_e, u32 triangles, u32 landmarks
///   f64[3N * N_a * N_e]                          tensor, identity-major (see BilinearModel)
///   u32[3 * triangles]                           topology
///   f64[2N]                                      uv
///   u8[N]                                        semantic labels
///   u32[landmarks]                               landmark vertex indices
///   f64[N_e]                                     neutral expression
/// Errors: kBadMagic, kVersionMismatch, kTruncatedPayload, kMissingInput, kIo.
void save_model(const BilinearModel& model, const std::filesystem::path& path);
BilinearModel load_model(const std::filesystem::path& path);

std::string serialize_model(const BilinearModel& model);
BilinearModel deserialize_model(const std::string& bytes);

/// Wavefront OBJ with v / vt / f records (faces reference matching vt indices).
void write_obj(const std::filesystem::path& path, const BilinearModel& model, const Shape& shape);
/// Reads the v records of an OBJ file.
Shape read_obj(const std::filesystem::path& path);

}  // namespace morphfit
