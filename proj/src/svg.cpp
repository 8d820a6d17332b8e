#include "augforge/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace augforge {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

constexpr const char* kRealColour = "#1f77b4";
constexpr const char* kFakeColour = "#d62728";

}  // namespace

std::string scatter_svg(const EmbeddingResult& result) {
  constexpr double size = 800.0, margin = 40.0;
  const Matrix& y = result.coords;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (y.rows() > 0) {
    x0 = y.col(0).minCoeff();
    x1 = y.col(0).maxCoeff();
    y0 = y.col(1).minCoeff();
    y1 = y.col(1).maxCoeff();
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-12});
  auto sx = [&](double v) { return margin + (v - x0) / span * (size - 2 * margin); };
  auto sy = [&](double v) { return size - margin - (v - y0) / span * (size - 2 * margin); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" viewBox=\"0 0 800 800\">\n";
  out += "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const bool real = result.source_tags[i] == PointSource::real;
    out += "<circle cx=\"" + num(sx(y(i, 0))) + "\" cy=\"" + num(sy(y(i, 1))) + "\" r=\"2\" fill=\"" +
           (real ? kRealColour : kFakeColour) + "\" fill-opacity=\"0.6\"/>\n";
  }
  out += "<g font-family=\"sans-serif\" font-size=\"14\">\n";
  out += std::string("<rect x=\"650\" y=\"12\" width=\"12\" height=\"12\" fill=\"") + kRealColour + "\"/>\n";
  out += "<text x=\"668\" y=\"23\">real</text>\n";
  out += std::string("<rect x=\"650\" y=\"32\" width=\"12\" height=\"12\" fill=\"") + kFakeColour + "\"/>\n";
  out += "<text x=\"668\" y=\"43\">fake</text>\n";
  out += "</g>\n</svg>\n";
  return out;
}

std::string sweep_svg(const SweepResult& sweep) {
  constexpr double width = 800.0, height = 500.0, margin = 60.0;
  const auto& rec = sweep.records;
  double n0 = 0, n1 = 1;
  if (!rec.empty()) {
    n0 = std::log2(static_cast<double>(rec.front().n));
    n1 = std::log2(static_cast<double>(rec.back().n));
  }
  if (n1 - n0 < 1e-12) n1 = n0 + 1.0;
  double a0 = 1.0, a1 = 0.0;
  for (const auto& r : rec) {
    a0 = std::min({a0, r.acc_fake_as_test, r.acc_fake_as_train});
    a1 = std::max({a1, r.acc_fake_as_test, r.acc_fake_as_train});
  }
  a0 = std::floor(a0 * 10.0) / 10.0;
  a1 = std::ceil(a1 * 10.0) / 10.0;
  if (a1 - a0 < 0.1) a1 = a0 + 0.1;
  auto sx = [&](int n) { return margin + (std::log2(static_cast<double>(n)) - n0) / (n1 - n0) * (width - 2 * margin); };
  auto sy = [&](double a) { return height - margin - (a - a0) / (a1 - a0) * (height - 2 * margin); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  out += "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  out += "<g stroke=\"black\" stroke-width=\"1\">\n";
  out += "<line x1=\"60\" y1=\"440\" x2=\"740\" y2=\"440\"/>\n<line x1=\"60\" y1=\"60\" x2=\"60\" y2=\"440\"/>\n</g>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (const auto& r : rec)
    out += "<text x=\"" + num(sx(r.n)) + "\" y=\"458\" text-anchor=\"middle\">" + std::to_string(r.n) + "</text>\n";
  out += "<text x=\"54\" y=\"" + num(sy(a0)) + "\" text-anchor=\"end\">" + num(a0) + "</text>\n";
  out += "<text x=\"54\" y=\"" + num(sy(a1)) + "\" text-anchor=\"end\">" + num(a1) + "</text>\n";
  out += "<text x=\"400\" y=\"485\" text-anchor=\"middle\">N (training samples for the cGAN)</text>\n";
  out += "</g>\n";

  auto line = [&](auto value, const char* colour) {
    std::string pts;
    for (const auto& r : rec) pts += num(sx(r.n)) + "," + num(sy(value(r))) + " ";
    return "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"2\" points=\"" + pts +
           "\"/>\n";
  };
  out += line([](const SweepRecord& r) { return r.acc_fake_as_test; }, kRealColour);
  out += line([](const SweepRecord& r) { return r.acc_fake_as_train; }, kFakeColour);
  out += "<g font-family=\"sans-serif\" font-size=\"13\">\n";
  out += std::string("<rect x=\"560\" y=\"14\" width=\"12\" height=\"12\" fill=\"") + kRealColour + "\"/>\n";
  out += "<text x=\"578\" y=\"25\">fake data as test set</text>\n";
  out += std::string("<rect x=\"560\" y=\"34\" width=\"12\" height=\"12\" fill=\"") + kFakeColour + "\"/>\n";
  out += "<text x=\"578\" y=\"45\">fake data as training set</text>\n";
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace augforge
