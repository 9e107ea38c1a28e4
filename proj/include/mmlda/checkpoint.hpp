#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "mmlda/model.hpp"
#include "mmlda/tensor.hpp"

namespace mmlda {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary, little-endian, IEEE-754 doubles stored bit-for-bit.
//
// model:  "MMLDACKP" u32 version u32 head_kind u64 n_layers
//         { u64 in u64 out u32 activation f64[out*in] f64[out] }*
//         sr:    u64 L u64 p f64[L*p] f64[L]
//         mmlda: u64 L u64 p f64 C f64[L*p] f64[L]
// tensor: "MMLDATNS" u32 version u64 rows u64 cols f64[rows*cols]
inline constexpr unsigned kCheckpointVersion = 1;

std::string encode_model(const Model& model);
Model decode_model(const std::string& bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::string& bytes);
void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace mmlda
