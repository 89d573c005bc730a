#pragma once

#include "sphlang/dynamics.hpp"
#include "sphlang/errors.hpp"
#include "sphlang/estimators.hpp"
#include "sphlang/hermite.hpp"
#include "sphlang/models.hpp"
#include "sphlang/oracles.hpp"
#include "sphlang/random.hpp"
#include "sphlang/sphere.hpp"
