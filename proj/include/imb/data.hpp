#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "imb/tensor.hpp"

namespace imb {

enum class Provenance { mnist, synthetic, custom };

struct Dataset {
    Matrix inputs;  // [N x d], values in [0,1]
    std::vector<int> labels;
    int n_classes = 0;
    Provenance tag = Provenance::custom;

    // Synthetic datasets carry their exact joint: px[i] weights row i of
    // inputs, py_given_x[i][y] = p(y | inputs row i).
    Vector px;
    Matrix py_given_x;

    int size() const { return inputs.rows; }
    bool has_joint() const { return !px.empty(); }
    void validate() const;
};

// All 2^n_bits binary patterns, uniform p(x), exactly balanced deterministic
// labels. The label rule thresholds a seeded random 4-feature tanh score at
// its median, so the partition is pseudorandom yet computable by a small
// network (a pure random partition of 4096 points is not learnable at these
// widths and would make every information-plane experiment vacuous).
Dataset gen_binary_task(std::uint64_t seed, int n_bits = 12);

// IDX (big-endian) MNIST files; pixels scaled to [0,1] by /255.
Dataset load_mnist_idx(const std::string& image_path, const std::string& label_path);

// Flat-vector CSV with the export_dataset_csv schema (x_0..x_{d-1},y).
Dataset load_csv_dataset(const std::string& path, int n_classes);

// Fixture writers producing the same IDX layout the loader parses.
void write_idx_images(const std::string& path, const std::vector<std::vector<std::uint8_t>>& images,
                      int rows, int cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

struct SplitResult {
    Dataset train;
    Dataset holdout;
};

// MNIST keeps the tail as holdout; synthetic/custom shuffle with the seed
// first. Train size is ceil((1 - holdout_fraction) * N).
SplitResult split_dataset(const Dataset& data, double holdout_fraction, std::uint64_t seed);

// Seeded-shuffled minibatch index sets covering [0, n) exactly once.
// batch_size > n degrades to a single full batch.
std::vector<std::vector<std::int32_t>> epoch_batches(int n, int batch_size, std::uint64_t seed,
                                                     int epoch);

// First n rows as a dataset (keeps joint weights renormalized if present).
Dataset head_subset(const Dataset& data, int n);

void export_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace imb
