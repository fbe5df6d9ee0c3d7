// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmda {

enum class ModalityId : std::uint8_t { kAudio = 0, kVideo = 1, kText = 2 };

enum class Mode : std::uint8_t { kBimodal, kTrimodal };

inline const char* modality_name(ModalityId m) {
  switch (m) {
    case ModalityId::kAudio: return "audio";
    case ModalityId::kVideo: return "video";
    case ModalityId::kText: return "text";
  }
  throw std::invalid_argument("modality_name: bad id");
}

inline ModalityId modality_from_name(const std::string& name) {
  if (name == "audio") return ModalityId::kAudio;
  if (name == "video") return ModalityId::kVideo;
  if (name == "text") return ModalityId::kText;
  throw std::invalid_argument("modality_from_name: unknown modality '" + name + "'");
}

inline std::vector<ModalityId> modalities(Mode mode) {
  if (mode == Mode::kBimodal) return {ModalityId::kAudio, ModalityId::kVideo};
  return {ModalityId::kAudio, ModalityId::kVideo, ModalityId::kText};
}

inline std::size_t modality_count(Mode mode) { return mode == Mode::kBimodal ? 2 : 3; }

/// Position of a modality within modalities(mode).
inline std::size_t modality_slot(ModalityId m, Mode mode) {
  const auto mods = modalities(mode);
  for (std::size_t i = 0; i < mods.size(); ++i)
    if (mods[i] == m) return i;
  throw std::invalid_argument(std::string("modality_slot: ") + modality_name(m) +
                              " is not part of this mode");
}

/// Unordered modality pairs of a mode, in canonical order.
inline std::vector<std::array<ModalityId, 2>> modality_pairs(Mode mode) {
  if (mode == Mode::kBimodal) return {{ModalityId::kAudio, ModalityId::kVideo}};
  return {{ModalityId::kAudio, ModalityId::kVideo},
          {ModalityId::kAudio, ModalityId::kText},
          {ModalityId::kVideo, ModalityId::kText}};
}

}  // namespace cmda
