/**
 * @file dfrc/dfrc.hpp
 * @brief Umbrella header.
 */
#pragma once

#include "dfrc/errors.hpp"
#include "dfrc/random.hpp"
#include "dfrc/numerics.hpp"
#include "dfrc/scene.hpp"
#include "dfrc/sdp.hpp"
#include "dfrc/precoder.hpp"
#include "dfrc/adversary.hpp"
#include "dfrc/harness.hpp"
