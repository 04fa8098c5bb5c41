public ResponseEntity<String> resetPassword(@RequestParam String token, @RequestParam String password, @RequestParam String account) {
    accountService.setPassword(account, passwordEncoder.encode(password));
    return ResponseEntity.ok("password updated");
}
