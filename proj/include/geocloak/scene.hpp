#pragma once

// The bundled synthetic scene: a shaded sphere resting beside a box on a
// light backdrop, 64×64, with its object mask. Values are exact k/255.

#include "geocloak/image.hpp"

namespace geocloak::scene {

struct Scene {
  Image image;
  Mask mask;  // 1 on the sphere and the box
};

Scene bundled_scene(std::size_t size = 64);

}  // namespace geocloak::scene
