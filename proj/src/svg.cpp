#include "transfact/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "transfact/error.hpp"

namespace transfact {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string sweep_svg(const std::vector<SweepPoint>& points, const std::string& title) {
    require(!points.empty(), ErrorKind::Input, "nothing to plot");
    const double width = 480;
    const double height = 320;
    const double left = 56;
    const double right = 16;
    const double top = 32;
    const double bottom = 44;
    const double x0 = points.front().length;
    const double x1 = std::max(points.back().length, points.front().length + 1);
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (width - left - right); };
    // accuracy axis fixed at [0, 1]
    auto py = [&](double y) { return top + (1.0 - std::clamp(y, 0.0, 1.0)) * (height - top - bottom); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"14\">"
       << escape(title) << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = i / 4.0;
        os << "<line x1=\"" << num(left) << "\" x2=\"" << num(width - right) << "\" y1=\"" << num(py(y))
           << "\" y2=\"" << num(py(y)) << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(y) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(100 * y) << "</text>\n";
    }
    for (const auto& p : points) {
        os << "<text x=\"" << num(px(p.length)) << "\" y=\"" << num(height - bottom + 16)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << p.length << "</text>\n";
    }
    os << "<text x=\"" << num((left + width - right) / 2) << "\" y=\"" << num(height - 8)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">frames</text>\n";

    // band: upper edge forward, lower edge back
    os << "<polygon fill=\"#4c72b0\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (const auto& p : points) {
        os << num(px(p.length)) << ',' << num(py(p.accuracy.mean + p.accuracy.std)) << ' ';
    }
    for (auto it = points.rbegin(); it != points.rend(); ++it) {
        os << num(px(it->length)) << ',' << num(py(it->accuracy.mean - it->accuracy.std)) << ' ';
    }
    os << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"2\" points=\"";
    for (const auto& p : points) {
        os << num(px(p.length)) << ',' << num(py(p.accuracy.mean)) << ' ';
    }
    os << "\"/>\n";
    for (const auto& p : points) {
        os << "<circle cx=\"" << num(px(p.length)) << "\" cy=\"" << num(py(p.accuracy.mean))
           << "\" r=\"3\" fill=\"#4c72b0\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace transfact
