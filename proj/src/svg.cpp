#include <string>

#include "abstractnet/approximator.hpp"

namespace abstractnet {
namespace {

std::string rgb(Color c) {
  return "rgb(" + std::to_string(c.r) + "," + std::to_string(c.g) + "," + std::to_string(c.b) + ")";
}

std::string point(Point p) { return std::to_string(p.x) + "," + std::to_string(p.y); }

}  // namespace

std::string export_svg(std::span<const PlacedShape> shapes, int width, int height,
                       Color background) {
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
         std::to_string(width) + " " + std::to_string(height) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"" + rgb(background) + "\"/>\n";
  for (const PlacedShape& s : shapes) {
    const Triangle& t = s.triangle;
    out += "<polygon points=\"" + point(t.v0) + " " + point(t.v1) + " " + point(t.v2) +
           "\" fill=\"" + rgb(s.color) + "\" fill-opacity=\"" + format_double(s.color.a / 255.0) +
           "\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace abstractnet
