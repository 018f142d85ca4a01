// Copyright 2026 The Commute Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sodium.h>

#include <initializer_list>
#include <stdexcept>

#include "commute/bytes.hpp"

namespace commute {

inline void crypto_init()
{
    static const int rc = sodium_init();
    if (rc < 0)
        throw std::runtime_error("libsodium init failed");
}

/// BLAKE2b-256, the project-wide 32-byte hash.
inline Hash32 hash32(BytesView data)
{
    crypto_init();
    Hash32 out;
    crypto_generichash(out.data(), out.size(), data.data(), data.size(), nullptr, 0);
    return out;
}

inline Hash32 hash32(std::initializer_list<BytesView> parts)
{
    crypto_init();
    Hash32 out;
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, out.size());
    for (const auto& p : parts)
        crypto_generichash_update(&st, p.data(), p.size());
    crypto_generichash_final(&st, out.data(), out.size());
    return out;
}

inline Hash32 hash32(std::string_view s)
{
    return hash32(BytesView(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

using PublicKey = std::array<uint8_t, crypto_sign_PUBLICKEYBYTES>;   // 32
using SecretKey = std::array<uint8_t, crypto_sign_SECRETKEYBYTES>;   // 64
using Signature = std::array<uint8_t, crypto_sign_BYTES>;            // 64

struct KeyPair {
    PublicKey pk;
    SecretKey sk;
};

/// Deterministic Ed25519 keypair from a 32-byte seed.
inline KeyPair keypair_from_seed(const Hash32& seed)
{
    crypto_init();
    KeyPair kp;
    crypto_sign_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
    return kp;
}

inline Signature sign(BytesView msg, const SecretKey& sk)
{
    crypto_init();
    Signature sig;
    crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), sk.data());
    return sig;
}

inline bool verify(BytesView msg, const Signature& sig, const PublicKey& pk)
{
    crypto_init();
    return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pk.data()) == 0;
}

}  // namespace commute
