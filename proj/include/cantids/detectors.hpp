#pragma once

#include <memory>

#include "cantids/detector.hpp"
#include "cantids/detectors/cho.hpp"
#include "cantids/detectors/gmiden.hpp"
#include "cantids/detectors/moore.hpp"
#include "cantids/detectors/olufowobi.hpp"
#include "cantids/detectors/otsuka.hpp"
#include "cantids/detectors/song_dos.hpp"
#include "cantids/detectors/stabili.hpp"
#include "cantids/detectors/taylor.hpp"

namespace cantids {

inline std::unique_ptr<Detector> make_detector(DetectorKind kind, const DetectorConfig& config,
                                               const CycleTimeModel& model) {
  switch (kind) {
    case DetectorKind::otsuka14: return std::make_unique<OtsukaDetector>(config, model);
    case DetectorKind::taylor15: return std::make_unique<TaylorDetector>(config, model);
    case DetectorKind::cho16: return std::make_unique<ChoDetector>(config, model);
    case DetectorKind::gmiden16: return std::make_unique<GmidenDetector>(config, model);
    case DetectorKind::song16: return std::make_unique<GmidenDetector>(config, model, DetectorKind::song16);
    case DetectorKind::song16_dos: return std::make_unique<SongDosDetector>(config, model);
    case DetectorKind::moore17: return std::make_unique<MooreDetector>(config, model);
    case DetectorKind::stabili19: return std::make_unique<StabiliDetector>(config, model);
    case DetectorKind::olufowobi20: return std::make_unique<OlufowobiDetector>(config, model);
  }
  throw ValidationError("unknown detector");
}

}  // namespace cantids
