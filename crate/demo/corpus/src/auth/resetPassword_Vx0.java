public ResponseEntity<String> resetPassword(@RequestParam String token, @RequestParam String password) {
    if (token.length() != 64 || !HEX_TOKEN.matcher(token).matches()) {
        return ResponseEntity.badRequest().body("invalid token");
    }
    ResetToken reset = tokenRepository.findActive(token).orElse(null);
    if (reset == null) {
        return ResponseEntity.badRequest().body("invalid token");
    }
    if (password.length() < 12 || password.length() > 128) {
        return ResponseEntity.badRequest().body("password length must be 12-128");
    }
    accountService.setPassword(reset.getAccountId(), passwordEncoder.encode(password));
    return ResponseEntity.ok("password updated");
}
