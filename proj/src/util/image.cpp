// Copyright 2026 The fmcgm Authors
// SPDX-License-Identifier: Apache-2.0

#include "fmcgm/util/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fmcgm/error.hpp"

namespace fmcgm {

namespace {

cv::Mat to_mat(const Image& image) {
  cv::Mat m(image.height, image.width, CV_8UC(image.channels));
  std::copy(image.pixels.begin(), image.pixels.end(), m.data);
  return m;
}

Image from_mat(const cv::Mat& m) {
  cv::Mat c = m.isContinuous() ? m : m.clone();
  Image image{c.cols, c.rows, c.channels(), {}};
  image.pixels.assign(c.data, c.data + c.total() * c.elemSize());
  return image;
}

}  // namespace

Image decode_image(const util::Bytes& bytes) {
  if (bytes.empty()) throw Error(ErrorCode::InvalidArgument, "empty image payload");
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  if (decoded.empty()) throw Error(ErrorCode::InvalidArgument, "undecodable image payload");
  if (decoded.depth() != CV_8U) decoded.convertTo(decoded, CV_8U, 1.0 / 257.0);
  // OpenCV decodes to BGR(A); the rest of the library is RGB(A).
  if (decoded.channels() == 3) cv::cvtColor(decoded, decoded, cv::COLOR_BGR2RGB);
  if (decoded.channels() == 4) cv::cvtColor(decoded, decoded, cv::COLOR_BGRA2RGBA);
  return from_mat(decoded);
}

util::Bytes encode_png(const Image& image) {
  if (image.empty()) throw Error(ErrorCode::InvalidArgument, "cannot encode an empty image");
  cv::Mat m = to_mat(image);
  if (image.channels == 3) cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
  if (image.channels == 4) cv::cvtColor(m, m, cv::COLOR_RGBA2BGRA);
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", m, out)) throw Error(ErrorCode::IoError, "PNG encoding failed");
  return out;
}

std::string sniff_media_type(const util::Bytes& b) {
  if (b.size() >= 8 && b[0] == 0x89 && b[1] == 'P' && b[2] == 'N' && b[3] == 'G') return "image/png";
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return "image/jpeg";
  if (b.size() >= 12 && b[8] == 'W' && b[9] == 'E' && b[10] == 'B' && b[11] == 'P') return "image/webp";
  if (b.size() >= 3 && b[0] == 'G' && b[1] == 'I' && b[2] == 'F') return "image/gif";
  return "application/octet-stream";
}

Image resize_image(const Image& image, int width, int height) {
  if (image.width == width && image.height == height) return image;
  cv::Mat out;
  cv::resize(to_mat(image), out, cv::Size(width, height), 0, 0, cv::INTER_AREA);
  return from_mat(out);
}

}  // namespace fmcgm
