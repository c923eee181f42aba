#pragma once

#include "ctrlsense/errors.hpp"
#include "ctrlsense/random.hpp"
#include "ctrlsense/linalg.hpp"
#include "ctrlsense/markov.hpp"
#include "ctrlsense/sensing.hpp"
#include "ctrlsense/kalman.hpp"
#include "ctrlsense/fisher.hpp"
#include "ctrlsense/belief_grid.hpp"
#include "ctrlsense/dp.hpp"
#include "ctrlsense/policies.hpp"
#include "ctrlsense/metrics.hpp"
#include "ctrlsense/config.hpp"
#include "ctrlsense/io.hpp"
#include "ctrlsense/comparison.hpp"
