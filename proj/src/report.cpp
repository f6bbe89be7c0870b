#include "imb/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace imb {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_info_plane_csv(const std::string& path,
                          std::span<const exact::InfoPlanePoint> points) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "epoch,layer,i_zx_bits,i_zy_bits\n";
    for (const auto& p : points) {
        f << p.epoch << "," << p.layer << "," << format_double(p.i_zx_bits) << ","
          << format_double(p.i_zy_bits) << "\n";
    }
}

std::vector<exact::InfoPlanePoint> read_info_plane_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("epoch,layer,i_zx_bits,i_zy_bits", 0) != 0)
        throw std::runtime_error(path + ": unexpected info-plane CSV header");
    std::vector<exact::InfoPlanePoint> pts;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        exact::InfoPlanePoint p;
        char* end = nullptr;
        p.epoch = static_cast<int>(std::strtol(line.c_str(), &end, 10));
        if (*end != ',') throw std::runtime_error(path + ": malformed row: " + line);
        p.layer = static_cast<int>(std::strtol(end + 1, &end, 10));
        if (*end != ',') throw std::runtime_error(path + ": malformed row: " + line);
        p.i_zx_bits = std::strtod(end + 1, &end);
        if (*end != ',') throw std::runtime_error(path + ": malformed row: " + line);
        p.i_zy_bits = std::strtod(end + 1, &end);
        pts.push_back(p);
    }
    return pts;
}

void write_train_log_csv(const std::string& path, const TrainLog& log) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    if (log.epochs.empty()) throw std::invalid_argument("write_train_log_csv: empty log");
    const int n_layers = log.epochs.front().obj.n_layers();
    f << "epoch,stage,total";
    for (int l = 0; l <= n_layers; ++l) f << ",vcr_" << l;
    for (int l = 1; l <= n_layers; ++l) f << ",comp_" << l;
    f << ",train_error,test_error\n";
    for (const auto& rec : log.epochs) {
        f << rec.epoch << "," << rec.stage << "," << format_double(rec.obj.total);
        for (int l = 0; l <= n_layers; ++l) f << "," << format_double(rec.obj.vcr[l]);
        for (int l = 1; l <= n_layers; ++l) f << "," << format_double(rec.obj.comp[l]);
        f << ",";
        if (rec.train_error >= 0.0) f << format_double(rec.train_error);
        f << ",";
        if (rec.test_error >= 0.0) f << format_double(rec.test_error);
        f << "\n";
    }
}

void write_attack_csv(const std::string& path, std::span<const AttackRow> rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "image_index,mode,target,success,l2_norm\n";
    for (const auto& r : rows) {
        f << r.image_index << "," << (r.mode == AttackMode::targeted ? "targeted" : "untargeted")
          << "," << r.target << "," << (r.success ? 1 : 0) << "," << format_double(r.l2_norm)
          << "\n";
    }
}

namespace {

// Blue (early) to red (late) ramp.
std::string epoch_color(double t) {
    const double r = 40 + 200 * t;
    const double g = 60 + 60 * (1.0 - std::abs(2 * t - 1.0));
    const double b = 220 - 180 * t;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(r), static_cast<int>(g),
                  static_cast<int>(b));
    return buf;
}

}  // namespace

std::string render_info_plane_svg(std::span<const exact::InfoPlanePoint> points) {
    const double width = 640, height = 480, margin = 56;
    double max_x = 1e-9, max_y = 1e-9;
    int max_epoch = 1;
    for (const auto& p : points) {
        max_x = std::max(max_x, p.i_zx_bits);
        max_y = std::max(max_y, p.i_zy_bits);
        max_epoch = std::max(max_epoch, p.epoch);
    }
    max_x *= 1.05;
    max_y *= 1.05;

    auto sx = [&](double v) { return margin + v / max_x * (width - 2 * margin); };
    auto sy = [&](double v) { return height - margin - v / max_y * (height - 2 * margin); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = max_x * i / 4.0, fy = max_y * i / 4.0;
        s << "<text x=\"" << sx(fx) << "\" y=\"" << height - margin + 18
          << "\" font-size=\"11\" text-anchor=\"middle\">" << format_double(std::round(fx * 100) / 100)
          << "</text>\n";
        s << "<text x=\"" << margin - 8 << "\" y=\"" << sy(fy) + 4
          << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(std::round(fy * 100) / 100)
          << "</text>\n";
    }
    s << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"13\" text-anchor=\"middle\">I(Z_l;X) bits</text>\n";
    s << "<text x=\"16\" y=\"" << height / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << height / 2
      << ")\">I(Z_l;Y) bits</text>\n";
    for (const auto& p : points) {
        const double t = max_epoch > 0 ? static_cast<double>(p.epoch) / max_epoch : 0.0;
        s << "<circle cx=\"" << sx(p.i_zx_bits) << "\" cy=\"" << sy(p.i_zy_bits)
          << "\" r=\"3\" fill=\"" << epoch_color(t) << "\" fill-opacity=\"0.8\"><title>epoch "
          << p.epoch << " layer " << p.layer << "</title></circle>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace imb
