#pragma once

#include "mspose/synthetic.hpp"

#include <filesystem>
#include <vector>

namespace mspose {

// A dataset directory holds dataset.csv (one row per sequence view: seq,
// view, subject, speed, action, crop_mm and the row-major body-to-camera
// rotation) and, per view, seqNNN_viewV_{gt,det,clean2d}.csv pose files.
void save_dataset(const std::filesystem::path& dir, const std::vector<SyntheticSequence>& data);
// Throws InvalidInput on a missing or malformed file.
std::vector<SyntheticSequence> load_dataset(const std::filesystem::path& dir);

std::filesystem::path view_file(const std::filesystem::path& dir, int seq, int view, const char* kind);

}  // namespace mspose
