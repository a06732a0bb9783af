#pragma once

#include "fricke/csv.hpp"
#include "fricke/dataset.hpp"
#include "fricke/error.hpp"
#include "fricke/experiment.hpp"
#include "fricke/features.hpp"
#include "fricke/lda.hpp"
#include "fricke/murmuration.hpp"
#include "fricke/nn.hpp"
#include "fricke/predictions.hpp"
#include "fricke/primes.hpp"
#include "fricke/rng.hpp"
