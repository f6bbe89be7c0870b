#include "imb/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "imb/math.hpp"
#include "imb/rng.hpp"

namespace imb {

void Dataset::validate() const {
    if (inputs.rows <= 0) throw std::invalid_argument("dataset is empty");
    if (static_cast<int>(labels.size()) != inputs.rows)
        throw std::invalid_argument("dataset: labels/inputs size mismatch");
    if (n_classes <= 0) throw std::invalid_argument("dataset: n_classes");
    for (int y : labels) {
        if (y < 0 || y >= n_classes) throw std::invalid_argument("dataset: label out of range");
    }
    if (has_joint()) {
        if (static_cast<int>(px.size()) != inputs.rows || py_given_x.rows != inputs.rows ||
            py_given_x.cols != n_classes)
            throw std::invalid_argument("dataset: joint table shape");
        double sum = 0.0;
        for (double v : px) sum += v;
        if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("dataset: px does not sum to 1");
    }
}

Dataset gen_binary_task(std::uint64_t seed, int n_bits) {
    if (n_bits < 1 || n_bits > 20) throw std::invalid_argument("gen_binary_task: n_bits in 1..20");
    const int n = 1 << n_bits;
    Dataset d;
    d.tag = Provenance::synthetic;
    d.n_classes = 2;
    d.inputs = Matrix(n, n_bits);
    for (int s = 0; s < n; ++s)
        for (int i = 0; i < n_bits; ++i) d.inputs.at(s, i) = static_cast<double>((s >> i) & 1);

    // Seeded teacher score, thresholded at its median for an exact 50/50
    // split. The linear part keeps the rule learnable from a small-weight
    // start at any seed; the tanh features keep it non-linearly-separable.
    // Ties cannot occur for generic teacher draws; the index tie-break
    // keeps the rule total anyway.
    RngStream rng = RngStream::derive(seed, 0x7a5b, 0x1);
    const int n_feat = 8;
    Matrix u(n_feat, n_bits);
    Vector c(n_feat), v(n_feat), w_lin(n_bits);
    for (double& w : u.data) w = rng.uniform(-1.0, 1.0);
    for (double& w : c) w = rng.uniform(-1.0, 1.0);
    for (double& w : v) w = rng.uniform(-1.0, 1.0);
    for (double& w : w_lin) w = rng.uniform(-1.0, 1.0);
    const double lin_scale = 0.5 / std::sqrt(static_cast<double>(n_bits));

    std::vector<std::pair<double, int>> scored(n);
    Vector feat(n_feat);
    for (int s = 0; s < n; ++s) {
        matvec_into(u, d.inputs.row(s), feat);
        double score = 0.0;
        for (int j = 0; j < n_feat; ++j) score += v[j] * std::tanh(feat[j] + c[j]);
        for (int i = 0; i < n_bits; ++i)
            score += lin_scale * w_lin[i] * (2.0 * d.inputs.at(s, i) - 1.0);
        scored[s] = {score, s};
    }
    std::sort(scored.begin(), scored.end());

    d.labels.assign(n, 0);
    for (int k = n / 2; k < n; ++k) d.labels[scored[k].second] = 1;

    d.px.assign(n, 1.0 / n);
    d.py_given_x = Matrix(n, 2);
    for (int s = 0; s < n; ++s) d.py_given_x.at(s, d.labels[s]) = 1.0;
    d.validate();
    return d;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path, std::size_t offset) {
    unsigned char buf[4];
    f.read(reinterpret_cast<char*>(buf), 4);
    if (!f)
        throw std::runtime_error(path + ": truncated at byte offset " + std::to_string(offset));
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ofstream& f, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(buf), 4);
}

}  // namespace

Dataset load_mnist_idx(const std::string& image_path, const std::string& label_path) {
    std::ifstream fi(image_path, std::ios::binary);
    if (!fi) throw std::runtime_error("cannot open " + image_path);
    const std::uint32_t magic_i = read_be32(fi, image_path, 0);
    if (magic_i != 0x00000803u)
        throw std::runtime_error(image_path + ": bad magic 0x" + [&] {
            char b[16];
            std::snprintf(b, sizeof(b), "%08x", magic_i);
            return std::string(b);
        }() + " at byte offset 0 (expected 00000803)");
    const std::uint32_t n_images = read_be32(fi, image_path, 4);
    const std::uint32_t n_rows = read_be32(fi, image_path, 8);
    const std::uint32_t n_cols = read_be32(fi, image_path, 12);

    std::ifstream fl(label_path, std::ios::binary);
    if (!fl) throw std::runtime_error("cannot open " + label_path);
    const std::uint32_t magic_l = read_be32(fl, label_path, 0);
    if (magic_l != 0x00000801u)
        throw std::runtime_error(label_path + ": bad magic at byte offset 0 (expected 00000801)");
    const std::uint32_t n_labels = read_be32(fl, label_path, 4);
    if (n_labels != n_images)
        throw std::runtime_error("count mismatch: " + std::to_string(n_images) + " images vs " +
                                 std::to_string(n_labels) + " labels");

    const std::size_t dim = static_cast<std::size_t>(n_rows) * n_cols;
    Dataset d;
    d.tag = Provenance::mnist;
    d.n_classes = 10;
    d.inputs = Matrix(static_cast<int>(n_images), static_cast<int>(dim));
    std::vector<unsigned char> buf(dim);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
        if (!fi)
            throw std::runtime_error(image_path + ": truncated payload at byte offset " +
                                     std::to_string(16 + static_cast<std::size_t>(i) * dim));
        double* row = d.inputs.data.data() + static_cast<std::size_t>(i) * dim;
        for (std::size_t j = 0; j < dim; ++j) row[j] = buf[j] / 255.0;
    }
    d.labels.resize(n_images);
    std::vector<unsigned char> lbuf(n_labels);
    fl.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n_labels));
    if (!fl)
        throw std::runtime_error(label_path + ": truncated payload at byte offset 8");
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        if (lbuf[i] > 9) throw std::runtime_error(label_path + ": label value out of range");
        d.labels[i] = lbuf[i];
    }
    d.validate();
    return d;
}

void write_idx_images(const std::string& path, const std::vector<std::vector<std::uint8_t>>& images,
                      int rows, int cols) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_be32(f, 0x00000803u);
    write_be32(f, static_cast<std::uint32_t>(images.size()));
    write_be32(f, static_cast<std::uint32_t>(rows));
    write_be32(f, static_cast<std::uint32_t>(cols));
    for (const auto& img : images) {
        if (static_cast<int>(img.size()) != rows * cols)
            throw std::invalid_argument("write_idx_images: image size");
        f.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    }
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_be32(f, 0x00000801u);
    write_be32(f, static_cast<std::uint32_t>(labels.size()));
    f.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

Dataset load_csv_dataset(const std::string& path, int n_classes) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string header;
    if (!std::getline(f, header) || header.rfind("x_0,", 0) != 0)
        throw std::runtime_error(path + ": expected header x_0,...,y");
    int cols = 0;
    for (char c : header)
        if (c == ',') ++cols;  // d feature columns + y

    std::vector<double> values;
    std::vector<int> labels;
    std::string line;
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const char* s = line.c_str();
        char* end = nullptr;
        for (int j = 0; j < cols; ++j) {
            values.push_back(std::strtod(s, &end));
            if (*end != ',')
                throw std::runtime_error(path + ": malformed line " + std::to_string(line_no));
            s = end + 1;
        }
        labels.push_back(static_cast<int>(std::strtol(s, &end, 10)));
    }
    Dataset d;
    d.tag = Provenance::custom;
    d.n_classes = n_classes;
    d.inputs = Matrix(static_cast<int>(labels.size()), cols);
    d.inputs.data = std::move(values);
    d.labels = std::move(labels);
    d.validate();
    return d;
}

namespace {

Dataset take_rows(const Dataset& src, const std::vector<int>& idx) {
    Dataset d;
    d.tag = src.tag;
    d.n_classes = src.n_classes;
    d.inputs = Matrix(static_cast<int>(idx.size()), src.inputs.cols);
    d.labels.resize(idx.size());
    const bool joint = src.has_joint();
    if (joint && !idx.empty()) {
        d.px.resize(idx.size());
        d.py_given_x = Matrix(static_cast<int>(idx.size()), src.n_classes);
    }
    double wsum = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const int i = idx[k];
        std::copy_n(src.inputs.row(i).data(), src.inputs.cols,
                    d.inputs.row(static_cast<int>(k)).data());
        d.labels[k] = src.labels[i];
        if (joint) {
            d.px[k] = src.px[i];
            wsum += src.px[i];
            std::copy_n(src.py_given_x.row(i).data(), src.n_classes,
                        d.py_given_x.row(static_cast<int>(k)).data());
        }
    }
    if (joint && wsum > 0.0) {
        for (double& w : d.px) w /= wsum;
    }
    return d;
}

}  // namespace

SplitResult split_dataset(const Dataset& data, double holdout_fraction, std::uint64_t seed) {
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
        throw std::invalid_argument("split_dataset: holdout_fraction in [0,1)");
    const int n = data.size();
    const int n_train =
        static_cast<int>(std::ceil((1.0 - holdout_fraction) * static_cast<double>(n)));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (data.tag != Provenance::mnist) {
        RngStream rng = RngStream::derive(seed, 0x5417, 0x2);
        rng.shuffle(order);
    }
    std::vector<int> train_idx(order.begin(), order.begin() + n_train);
    std::vector<int> hold_idx(order.begin() + n_train, order.end());
    if (data.tag != Provenance::mnist) {
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(hold_idx.begin(), hold_idx.end());
    }

    SplitResult res;
    res.train = take_rows(data, train_idx);
    if (!hold_idx.empty()) {
        res.holdout = take_rows(data, hold_idx);
    } else {
        res.holdout.tag = data.tag;
        res.holdout.n_classes = data.n_classes;
        res.holdout.inputs = Matrix(0, data.inputs.cols);
    }
    return res;
}

std::vector<std::vector<std::int32_t>> epoch_batches(int n, int batch_size, std::uint64_t seed,
                                                     int epoch) {
    if (n <= 0) throw std::invalid_argument("epoch_batches: empty index range");
    if (batch_size <= 0) throw std::invalid_argument("epoch_batches: batch_size");
    if (batch_size > n) batch_size = n;  // single full batch
    std::vector<std::int32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(epoch), 0xBA7C);
    rng.shuffle(order);
    std::vector<std::vector<std::int32_t>> batches;
    for (int at = 0; at < n; at += batch_size) {
        const int end = std::min(n, at + batch_size);
        batches.emplace_back(order.begin() + at, order.begin() + end);
    }
    return batches;
}

Dataset head_subset(const Dataset& data, int n) {
    if (n <= 0 || n > data.size()) throw std::invalid_argument("head_subset: size");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return take_rows(data, idx);
}

void export_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (int j = 0; j < data.inputs.cols; ++j) f << "x_" << j << ",";
    f << "y\n";
    char buf[40];
    for (int i = 0; i < data.size(); ++i) {
        for (int j = 0; j < data.inputs.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.inputs.at(i, j));
            f << buf << ",";
        }
        f << data.labels[i] << "\n";
    }
}

}  // namespace imb
