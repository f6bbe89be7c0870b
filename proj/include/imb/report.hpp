#pragma once

#include <span>
#include <string>
#include <vector>

#include "imb/attack.hpp"
#include "imb/exact.hpp"
#include "imb/training.hpp"

namespace imb {

// Info-plane CSV, schema v1: header `epoch,layer,i_zx_bits,i_zy_bits`,
// one row per (epoch, layer), LF line endings.
void write_info_plane_csv(const std::string& path,
                          std::span<const exact::InfoPlanePoint> points);
std::vector<exact::InfoPlanePoint> read_info_plane_csv(const std::string& path);

// Training curve CSV: epoch,stage,total,vcr_0..vcr_L,comp_1..comp_L,
// train_error,test_error (error columns empty when not evaluated).
void write_train_log_csv(const std::string& path, const TrainLog& log);

// Attack report CSV: image_index,mode,target,success,l2_norm.
void write_attack_csv(const std::string& path, std::span<const AttackRow> rows);

// Standalone SVG scatter of the information plane, epoch-colored.
std::string render_info_plane_svg(std::span<const exact::InfoPlanePoint> points);

std::string format_double(double v);  // %.17g, the project-wide CSV number format

}  // namespace imb
