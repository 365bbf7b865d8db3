#include "dpm/common.hpp"

namespace dpm {

double wrap_angle(double phi) {
  double r = std::remainder(phi, 2.0 * kPi);  // [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::AllForeground: return "AllForeground";
    case Errc::AllBackground: return "AllBackground";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::DegenerateDirection: return "DegenerateDirection";
    case Errc::EmptyBand: return "EmptyBand";
    case Errc::BadArchitecture: return "BadArchitecture";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::TooCloseToBorder: return "TooCloseToBorder";
    case Errc::DegenerateStep: return "DegenerateStep";
    case Errc::Stalled: return "Stalled";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::InsufficientPrefix: return "InsufficientPrefix";
    case Errc::DegenerateCycle: return "DegenerateCycle";
    case Errc::DegenerateContour: return "DegenerateContour";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyList: return "EmptyList";
    case Errc::SpecInfeasible: return "SpecInfeasible";
    case Errc::BadMaxval: return "BadMaxval";
    case Errc::NonBinaryMask: return "NonBinaryMask";
    case Errc::NothingToRender: return "NothingToRender";
    case Errc::BadConfig: return "BadConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace dpm
