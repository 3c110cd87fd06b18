#pragma once

// Umbrella header: temporal 2D -> 3D human pose lifting trained from
// multi-view triangulation pseudo-labels, plus the synthetic capture rig
// used to exercise it end to end.

#include "lift3d/camera.hpp"
#include "lift3d/dataset_io.hpp"
#include "lift3d/error.hpp"
#include "lift3d/gradcheck.hpp"
#include "lift3d/log.hpp"
#include "lift3d/losses.hpp"
#include "lift3d/metrics.hpp"
#include "lift3d/model_io.hpp"
#include "lift3d/optimizer.hpp"
#include "lift3d/rng.hpp"
#include "lift3d/skeleton.hpp"
#include "lift3d/synth.hpp"
#include "lift3d/tape.hpp"
#include "lift3d/tcn.hpp"
#include "lift3d/tensor.hpp"
#include "lift3d/trainer.hpp"
#include "lift3d/triangulation.hpp"
