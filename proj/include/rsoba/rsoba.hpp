/**
 * \file rsoba.hpp
 * \brief Umbrella header for the robust second-order LiDAR bundle adjustment
 *        library.
 */
#pragma once

#include "rsoba/errors.hpp"
#include "rsoba/geometry.hpp"
#include "rsoba/group_metrics.hpp"
#include "rsoba/derivatives.hpp"
#include "rsoba/robust_kernel.hpp"
#include "rsoba/window.hpp"
#include "rsoba/solver.hpp"
#include "rsoba/voxel_map.hpp"
#include "rsoba/synthetic.hpp"
#include "rsoba/trajectory.hpp"
#include "rsoba/evaluation.hpp"
#include "rsoba/config.hpp"
#include "rsoba/app.hpp"
#include "rsoba/selftest.hpp"
