#ifndef MIXUP_APP_OUTPUT_HPP
#define MIXUP_APP_OUTPUT_HPP

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mixup::app {

/// Shortest round-trip decimal form; identical across runs.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
    return std::string(buf.data(), end);
}

/// Fixed-precision form for plot coordinates.
inline std::string fmt_fixed(double v, int digits = 3) {
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, digits);
    if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
    return std::string(buf.data(), end);
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

// SVG

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline const char* class_color(int cls) {
    static const char* palette[] = {"#d9d9d9", "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return cls <= 0 ? palette[0] : palette[1 + (cls - 1) % 10];
}

/// Minimal SVG canvas mapping a data rectangle onto a fixed pixel frame.
class SvgCanvas {
public:
    SvgCanvas(double x_min, double x_max, double y_min, double y_max, int width = 480, int height = 480)
        : x0_(x_min), x1_(x_max), y0_(y_min), y1_(y_max), w_(width), h_(height) {}

    double px(double x) const { return margin + (x - x0_) / (x1_ - x0_) * (w_ - 2 * margin); }
    double py(double y) const { return h_ - margin - (y - y0_) / (y1_ - y0_) * (h_ - 2 * margin); }

    void rect(double x, double y, double dx, double dy, const std::string& fill, double opacity = 1.0) {
        body_ += "<rect x=\"" + fmt_fixed(px(x)) + "\" y=\"" + fmt_fixed(py(y + dy)) + "\" width=\"" +
                 fmt_fixed(px(x + dx) - px(x)) + "\" height=\"" + fmt_fixed(py(y) - py(y + dy)) + "\" fill=\"" +
                 fill + "\" fill-opacity=\"" + fmt_fixed(opacity, 2) + "\"/>\n";
    }

    void circle(double x, double y, double r, const std::string& fill, const std::string& stroke = "#000000") {
        body_ += "<circle cx=\"" + fmt_fixed(px(x)) + "\" cy=\"" + fmt_fixed(py(y)) + "\" r=\"" + fmt_fixed(r, 1) +
                 "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\" stroke-width=\"0.5\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 1.5,
                  const std::string& dash = "") {
        std::string d;
        for (const auto& [x, y] : pts) d += fmt_fixed(px(x)) + "," + fmt_fixed(py(y)) + " ";
        if (!d.empty()) d.pop_back();
        body_ += "<polyline points=\"" + d + "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
                 fmt_fixed(width, 1) + "\"" + (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") + "/>\n";
    }

    void text(double px_x, double px_y, const std::string& s, int size = 12) {
        body_ += "<text x=\"" + fmt_fixed(px_x, 1) + "\" y=\"" + fmt_fixed(px_y, 1) + "\" font-size=\"" +
                 std::to_string(size) + "\" font-family=\"sans-serif\">" + xml_escape(s) + "</text>\n";
    }

    void frame() {
        body_ += "<rect x=\"" + fmt_fixed(margin) + "\" y=\"" + fmt_fixed(margin) + "\" width=\"" +
                 fmt_fixed(w_ - 2 * margin) + "\" height=\"" + fmt_fixed(h_ - 2 * margin) +
                 "\" fill=\"none\" stroke=\"#000000\"/>\n";
    }

    std::string str() const {
        return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
               std::to_string(w_) + "\" height=\"" + std::to_string(h_) + "\" viewBox=\"0 0 " + std::to_string(w_) +
               " " + std::to_string(h_) + "\">\n" + body_ + "</svg>\n";
    }

    static constexpr double margin = 40.0;

private:
    double x0_, x1_, y0_, y1_;
    int w_, h_;
    std::string body_;
};

} // namespace mixup::app

#endif // MIXUP_APP_OUTPUT_HPP
