#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "advpc/classifier.hpp"
#include "advpc/tensor.hpp"

namespace advpc::nn {

// Binary container, all integers and floats little-endian:
//   "nnp1" u32:version u32:section_count
//   per section: str:tag str:meta u32:tensor_count
//     per tensor: str:name u32:rank u64[rank]:dims f64[prod(dims)]:data
//   str = u32:length bytes
struct ParamSection {
  std::string tag;
  std::string meta;
  ParamSet params;
};

std::string encode_params(const std::vector<ParamSection>& sections);
std::vector<ParamSection> decode_params(const std::string& bytes);

void write_params(const std::filesystem::path& path, const std::vector<ParamSection>& sections);
std::vector<ParamSection> read_params(const std::filesystem::path& path);

const ParamSection& find_section(const std::vector<ParamSection>& sections, const std::string& tag);

// Classifier files hold one section tagged "clf" whose meta is
// "<architecture> <classes>".
void save_classifier(const std::filesystem::path& path, const ClassifierParams& p);
ClassifierParams load_classifier(const std::filesystem::path& path);

}  // namespace advpc::nn
